// Acceptance harness: one pass/fail line per criterion, exit 1 on any hard
// failure. Oracles here are scalar re-implementations independent of the
// tensor library's autodiff and of the production metric code.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aiareseg/cluster.hpp"
#include "aiareseg/train.hpp"
#include "gradcheck.hpp"

using namespace aia;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& label, const std::string& note = "") {
    if (!ok) ++failures;
    std::printf("criterion %2d: %s — %s%s%s\n", id, ok ? "PASS" : "FAIL", label.c_str(),
                note.empty() ? "" : " — ", note.c_str());
    std::fflush(stdout);
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// --- scalar matrix helpers for the equation oracles -------------------------

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor64& t) {
    Mat m(t.shape()[0], std::vector<double>(t.shape()[1]));
    for (size_t i = 0; i < t.shape()[0]; ++i)
        for (size_t j = 0; j < t.shape()[1]; ++j) m[i][j] = t.data()[i * t.shape()[1] + j];
    return m;
}

Mat mat_mul(const Mat& a, const Mat& b) {
    Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t k = 0; k < b.size(); ++k)
            for (size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

Mat mat_t(const Mat& a) {
    Mat c(a[0].size(), std::vector<double>(a.size()));
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < a[0].size(); ++j) c[j][i] = a[i][j];
    return c;
}

Mat softmax_rows(const Mat& a) {
    Mat c = a;
    for (auto& row : c) {
        double mx = *std::max_element(row.begin(), row.end());
        double sum = 0;
        for (auto& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (auto& v : row) v /= sum;
    }
    return c;
}

Mat mat_scale(Mat a, double s) {
    for (auto& row : a)
        for (auto& v : row) v *= s;
    return a;
}

Mat mat_add(const Mat& a, const Mat& b) {
    Mat c = a;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < a[0].size(); ++j) c[i][j] += b[i][j];
    return c;
}

// Eq. 1: per-head scaled dot-product attention, output projections summed.
Mat oracle_eq1(const Mat& Q, const Mat& K, const Mat& V, const AttentionWeights<double>& w) {
    Mat out;
    for (size_t h = 0; h < w.heads(); ++h) {
        auto M = mat_scale(mat_mul(mat_mul(Q, to_mat(w.wq[h])), mat_t(mat_mul(K, to_mat(w.wk[h])))),
                           1.0 / std::sqrt(static_cast<double>(w.head_width())));
        auto head = mat_mul(mat_mul(softmax_rows(M), mat_mul(V, to_mat(w.wv[h]))), to_mat(w.wo[h]));
        out = h == 0 ? head : mat_add(out, head);
    }
    return out;
}

// Eq. 2: attention over the columns of M, output projection (1 + W'_o).
Mat oracle_eq2(const Mat& M, const InnerAttentionWeights<double>& w) {
    auto X = mat_t(M);
    auto A = softmax_rows(mat_scale(mat_mul(mat_mul(X, to_mat(w.wq)), mat_t(mat_mul(X, to_mat(w.wk)))),
                                    1.0 / std::sqrt(static_cast<double>(M.size()))));
    auto Y = mat_mul(A, mat_mul(X, to_mat(w.wv)));
    return mat_t(mat_add(mat_mul(Y, to_mat(w.wo)), Y));
}

// Eq. 3: softmax(M + InnerAttn(M)) mixes the values, per head.
Mat oracle_eq3(const Mat& Q, const Mat& K, const Mat& V, const AttentionWeights<double>& w,
               const InnerAttentionWeights<double>& inner) {
    Mat out;
    for (size_t h = 0; h < w.heads(); ++h) {
        auto M = mat_scale(mat_mul(mat_mul(Q, to_mat(w.wq[h])), mat_t(mat_mul(K, to_mat(w.wk[h])))),
                           1.0 / std::sqrt(static_cast<double>(w.head_width())));
        auto A = softmax_rows(mat_add(M, oracle_eq2(M, inner)));
        auto head = mat_mul(mat_mul(A, mat_mul(V, to_mat(w.wv[h]))), to_mat(w.wo[h]));
        out = h == 0 ? head : mat_add(out, head);
    }
    return out;
}

double mat_max_abs_diff(const Mat& a, const Tensor64& b) {
    double worst = 0;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < a[0].size(); ++j)
            worst = std::max(worst, std::fabs(a[i][j] - b.data()[i * a[0].size() + j]));
    return worst;
}

// Exhaustive AP oracle: sweep every score cutoff; single object per frame, so
// matching is frame-local.
double ap_oracle(const std::vector<std::optional<ScoredBox>>& dets,
                 const std::vector<std::optional<BBox>>& truths, double thr) {
    size_t total_truth = 0;
    for (const auto& t : truths)
        if (t) ++total_truth;
    if (total_truth == 0) return 0.0;
    std::vector<double> cutoffs;
    for (const auto& d : dets)
        if (d) cutoffs.push_back(d->score);
    if (cutoffs.empty()) return 0.0;
    std::sort(cutoffs.begin(), cutoffs.end());
    std::vector<double> precision, recall;
    for (double cut : cutoffs) {
        size_t kept = 0, tp = 0;
        for (size_t f = 0; f < dets.size(); ++f) {
            if (!dets[f] || dets[f]->score < cut) continue;
            ++kept;
            if (truths[f] && iou(dets[f]->box, *truths[f]) >= thr) ++tp;
        }
        precision.push_back(static_cast<double>(tp) / static_cast<double>(kept));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(total_truth));
    }
    double ap = 0;
    for (int i = 0; i <= 100; ++i) {
        double r = static_cast<double>(i) / 100.0;
        double best = 0;
        for (size_t j = 0; j < recall.size(); ++j)
            if (recall[j] >= r) best = std::max(best, precision[j]);
        ap += best;
    }
    return ap / 101.0;
}

double mean_dsc(const EvalResult& r) {
    double acc = 0;
    for (const auto& row : r.rows) acc += row.dsc;
    return r.rows.empty() ? 0.0 : acc / static_cast<double>(r.rows.size());
}

// --- criteria ----------------------------------------------------------------

void criterion_1_gradients() {
    double worst = 0;
    auto check = [&](const std::function<Tensor64(std::vector<Tensor64>&)>& f,
                     std::vector<Tensor64> params) {
        worst = std::max(worst, gradcheck::max_grad_rel_err<double>(f, params, 1e-4));
    };
    Rng rng(11);

    // elementwise chain: sigmoid, relu, clamp, log, mul, add, sub, scale
    check(
        [](std::vector<Tensor64>& p) {
            auto s = sigmoid(p[0]);
            auto r = relu(add_scalar(scale(p[0], 0.5), 0.3));
            auto l = log_op(clamp(s, 0.05, 0.95));
            return mean(sub(mul(s, r), add(l, p[0])));
        },
        {Tensor64::randn({2, 3}, rng, 0.8, true)});

    // matmul, softmax, transpose, layer_norm, add_rows, sum
    check(
        [](std::vector<Tensor64>& p) {
            auto n = layer_norm(p[0], size_t(1), p[2], p[3]);
            auto m = softmax(matmul(n, p[1]), 1);
            return sum(mul(transpose2d(m), transpose2d(add_rows(m, p[4]))));
        },
        {Tensor64::randn({3, 4}, rng, 1.0, true), Tensor64::randn({4, 3}, rng, 1.0, true),
         Tensor64::randn({4}, rng, 0.3, true), Tensor64::randn({4}, rng, 0.3, true),
         Tensor64::randn({3}, rng, 0.5, true)});

    // structural ops: permute, reshape, slice, concat
    check(
        [](std::vector<Tensor64>& p) {
            auto t = permute(p[0], {2, 0, 1});
            auto r = reshape(t, {4, 6});
            auto s = slice(r, 0, 1, 2);
            auto c = concat(std::vector<Tensor64>{s, s}, 0);
            return mean(mul(c, c));
        },
        {Tensor64::randn({2, 3, 4}, rng, 1.0, true)});

    // conv2d with channel bias
    check(
        [](std::vector<Tensor64>& p) {
            return mean(relu(add_chan(conv2d(p[0], p[1], 2, 1), p[2])));
        },
        {Tensor64::randn({2, 6, 6}, rng, 1.0, true), Tensor64::randn({3, 2, 3, 3}, rng, 0.5, true),
         Tensor64::randn({3}, rng, 0.5, true)});

    // conv3d time reduction and transposed 3d upsampling
    check(
        [](std::vector<Tensor64>& p) {
            auto t = conv3d(p[0], p[1], {1, 1, 1});
            return mean(conv_transpose3d(t, p[2], {1, 2, 2}));
        },
        {Tensor64::randn({2, 3, 4, 4}, rng, 1.0, true),
         Tensor64::randn({2, 2, 3, 1, 1}, rng, 0.5, true),
         Tensor64::randn({2, 2, 1, 2, 2}, rng, 0.5, true)});

    // combined loss through a 2-stage conv model
    auto img = Tensor64::randn({1, 8, 8}, rng, 0.5, false);
    std::vector<double> bits(16, 0.0);
    bits[5] = bits[6] = 1.0;
    auto truth = Tensor64::from_data({1, 4, 4}, std::move(bits));
    check(
        [img, truth](std::vector<Tensor64>& p) {
            auto h = relu(add_chan(conv2d(img, p[0], 2, 1), p[1]));
            auto pred = sigmoid(add_chan(conv2d(h, p[2], 1, 1), p[3]));
            return combined_loss(pred, truth, LossConfig{});
        },
        {Tensor64::randn({4, 1, 3, 3}, rng, 0.5, true), Tensor64::randn({4}, rng, 0.2, true),
         Tensor64::randn({1, 4, 3, 3}, rng, 0.5, true), Tensor64::randn({1}, rng, 0.2, true)});

    report(1, worst < 1e-6, "gradient suite (64-bit finite differences)",
           "max relative error " + std::to_string(worst));
}

void criterion_2_degeneracy() {
    Rng rng(22);
    bool ok = true;
    for (int trial = 0; trial < 100 && ok; ++trial) {
        size_t C = 8, heads = 2;
        size_t nq = 2 + rng.next_below(5), nk = 2 + rng.next_below(5);
        auto w = AttentionWeights<float>::init(C, heads, rng);
        auto inner = InnerAttentionWeights<float>::init(nq, rng, 16);
        for (auto& v : inner.wv.data()) v = 0.0f;  // zero value path => inner contribution 0
        auto Q = Tensor32::randn({nq, C}, rng, 1.0f, false);
        auto K = Tensor32::randn({nk, C}, rng, 1.0f, false);
        auto V = Tensor32::randn({nk, C}, rng, 1.0f, false);
        auto plain = dot_product_attention(Q, K, V, w);
        auto full = aia_attention(Q, K, V, w, inner);
        ok = plain.output.data().size() == full.output.data().size() &&
             std::memcmp(plain.output.data().data(), full.output.data().data(),
                         plain.output.data().size() * sizeof(float)) == 0;
    }
    report(2, ok, "AiA degeneracy: zeroed inner attention equals Eq. 1 bit-for-bit (100 trials)");
}

void criterion_3_equation_oracles() {
    Rng rng(33);
    double worst = 0;
    for (size_t n = 2; n <= 6; ++n) {
        size_t C = 8, heads = 2;
        auto w = AttentionWeights<double>::init(C, heads, rng);
        auto inner = InnerAttentionWeights<double>::init(n, rng, 16);
        for (auto& v : inner.wo.data()) v = rng.next_normal() * 0.3;  // exercise a nonzero W'_o
        auto Q = Tensor64::randn({n, C}, rng, 1.0, false);
        auto K = Tensor64::randn({n, C}, rng, 1.0, false);
        auto V = Tensor64::randn({n, C}, rng, 1.0, false);
        auto [Qm, Km, Vm] = std::tuple{to_mat(Q), to_mat(K), to_mat(V)};

        worst = std::max(worst, mat_max_abs_diff(oracle_eq1(Qm, Km, Vm, w),
                                                 dot_product_attention(Q, K, V, w).output));
        auto M = attention_maps(Q, K, w)[0];
        worst = std::max(worst, mat_max_abs_diff(oracle_eq2(to_mat(M), inner),
                                                 inner_attention(M, inner)));
        worst = std::max(worst, mat_max_abs_diff(oracle_eq3(Qm, Km, Vm, w, inner),
                                                 aia_attention(Q, K, V, w, inner).output));
    }
    // Eq. 4: VAR_rms against a direct two-pass population-variance computation
    PointSet pts;
    for (int i = 0; i < 9; ++i) pts.push_back({rng.next_uniform(0, 10), rng.next_uniform(0, 10)});
    double mx = 0, my = 0;
    for (const auto& p : pts) {
        mx += p.x / pts.size();
        my += p.y / pts.size();
    }
    double vx = 0, vy = 0;
    for (const auto& p : pts) {
        vx += (p.x - mx) * (p.x - mx) / pts.size();
        vy += (p.y - my) * (p.y - my) / pts.size();
    }
    worst = std::max(worst, std::fabs(std::sqrt(vx * vx + vy * vy) - var_rms(pts)));
    report(3, worst < 1e-5, "equation oracles for Eqs. 1-4 (N up to 6)",
           "max abs deviation " + std::to_string(worst));
}

void criterion_4_shape_contract() {
    bool ok = true;
    for (size_t size : {size_t(64), size_t(320)}) {
        ModelConfig mc;
        mc.image_size = size;
        auto model = SegModel<float>::init(mc, 7);
        Rng rng(size);
        auto img = [&] { return Tensor32::randn({1, size, size}, rng, 0.3f, false); };
        std::vector<float> bits(size * size, 0.0f);
        for (size_t i = 0; i < size; ++i) bits[i * size + i] = 1.0f;
        auto mask = Tensor32::from_data({size, size}, std::move(bits));
        ReferenceMemory<float> memory;
        auto out = model.forward(img(), img(), mask, img(), mask, memory);
        size_t grid = size / 16;
        ok = ok && out.search_tokens.shape() == Shape{grid * grid, mc.channels} &&
             out.prob.shape() == Shape{1, size, size};
    }
    report(4, ok, "shape contract: 320->20x20 tokens->320 mask, 64->4x4->64");
}

struct OverfitArtifacts {
    RunConfig train_cfg;
    std::string checkpoint;
    double train_dsc = 0;
};

OverfitArtifacts criterion_5_overfit(const fs::path& work) {
    OverfitArtifacts art;
    RunConfig cfg;
    cfg.dataset = (work / "train_ds").string();
    cfg.out = (work / "overfit").string();
    cfg.checkpoint = (work / "overfit/model.ckpt").string();
    cfg.sequences = 4;
    cfg.frames = 8;
    cfg.steps = 2000;
    cfg.seed = 2024;
    generate_dataset(cfg);
    train_model(cfg);
    auto model = SegModel<float>::init(cfg.model_config(), cfg.seed);
    model.load(cfg.checkpoint);
    auto infer = run_inference(cfg, model);
    auto eval = evaluate_predictions(cfg, infer.prediction_root);
    art.train_cfg = cfg;
    art.checkpoint = cfg.checkpoint;
    art.train_dsc = mean_dsc(eval);
    std::string note = "train-set DSC " + std::to_string(art.train_dsc);
    if (art.train_dsc >= 0.90) {
        report(5, true, "overfit: DSC >= 0.90 within 2000 steps", note);
    } else if (art.train_dsc >= 0.80) {
        report(5, true, "overfit (SOFT FAIL: DSC in [0.80, 0.90), needs investigation)", note);
    } else {
        report(5, false, "overfit: DSC >= 0.90 within 2000 steps", note);
    }
    return art;
}

void criterion_6_generalization(const fs::path& work, const OverfitArtifacts& art) {
    RunConfig held = art.train_cfg;
    held.dataset = (work / "heldout_ds").string();
    held.seed = 4048;  // same generator distribution, unseen sequences
    generate_dataset(held);

    held.out = (work / "gen_cath").string();
    auto cath_model = SegModel<float>::init(held.model_config(), held.seed);
    cath_model.load(art.checkpoint);
    auto cath_eval = evaluate_predictions(held, run_inference(held, cath_model).prediction_root);
    double cath_dsc = mean_dsc(cath_eval);

    RunConfig aorta = art.train_cfg;
    aorta.target = TargetClass::aorta;
    aorta.out = (work / "aorta").string();
    aorta.checkpoint = (work / "aorta/model.ckpt").string();
    train_model(aorta);
    auto aorta_model = SegModel<float>::init(aorta.model_config(), aorta.seed);
    aorta_model.load(aorta.checkpoint);
    RunConfig aorta_held = aorta;
    aorta_held.dataset = held.dataset;
    aorta_held.out = (work / "gen_aorta").string();
    auto aorta_eval =
        evaluate_predictions(aorta_held, run_inference(aorta_held, aorta_model).prediction_root);
    double aorta_dsc = mean_dsc(aorta_eval);

    report(6, aorta_dsc >= cath_dsc && cath_dsc >= 0.50,
           "generalization: held-out aorta DSC >= catheter DSC >= 0.50",
           "aorta " + std::to_string(aorta_dsc) + ", catheter " + std::to_string(cath_dsc));
}

void criterion_7_ap_oracle() {
    Rng rng(77);
    auto random_box = [&](double extent) {
        double x0 = rng.next_uniform(0, extent);
        double y0 = rng.next_uniform(0, extent);
        return BBox(x0, y0, x0 + 1 + rng.next_below(8), y0 + 1 + rng.next_below(8));
    };
    bool ok = true;
    for (int trial = 0; trial < 20 && ok; ++trial) {
        std::vector<std::optional<ScoredBox>> dets;
        std::vector<std::optional<BBox>> truths;
        for (int f = 0; f < 10; ++f) {
            if (rng.next_below(5) == 0) {
                truths.push_back(std::nullopt);
            } else {
                truths.push_back(random_box(20));
            }
            if (rng.next_below(5) == 0) {
                dets.push_back(std::nullopt);
            } else if (truths.back() && rng.next_below(3) != 0) {
                double dx = rng.next_uniform(-2, 2), dy = rng.next_uniform(-2, 2);
                BBox jit(truths.back()->x_min + dx, truths.back()->y_min + dy,
                         truths.back()->x_max + dx + rng.next_below(3),
                         truths.back()->y_max + dy + rng.next_below(3));
                dets.push_back(ScoredBox{rng.next_uniform(0.1, 1.0), jit});
            } else {
                dets.push_back(ScoredBox{rng.next_uniform(0.1, 1.0), random_box(20)});
            }
        }
        double prev = 2.0;
        for (int i = 0; i < 10 && ok; ++i) {
            double thr = 0.50 + 0.05 * i;
            double got = average_precision(dets, truths, thr);
            ok = std::fabs(got - ap_oracle(dets, truths, thr)) < 1e-12 && got <= prev + 1e-12;
            prev = got;
        }
        double mean_want = 0;
        for (int i = 0; i < 10; ++i) mean_want += ap_oracle(dets, truths, 0.50 + 0.05 * i);
        ok = ok && std::fabs(mean_ap(dets, truths) - mean_want / 10.0) < 1e-12;
    }
    report(7, ok, "AP equals exhaustive PR-sweep oracle; non-increasing in IOU threshold");
}

void criterion_8_baseline() {
    size_t within = 0, total = 0;
    const double sigmas[5] = {0.0, 0.05, 0.1, 0.15, 0.2};
    for (int s = 0; s < 5; ++s) {
        SequenceSpec spec;
        spec.frames = 10;
        spec.speckle_sigma = sigmas[s];
        spec.seed = 800 + s;
        for (const auto& frame : generate_sequence(spec)) {
            double tx = 0, ty = 0, n = 0;
            for (size_t y = 0; y < 64; ++y)
                for (size_t x = 0; x < 64; ++x)
                    if (frame.catheter_mask.data()[y * 64 + x] > 0.5f) {
                        tx += x;
                        ty += y;
                        n += 1;
                    }
            tx /= n;
            ty /= n;
            auto points = threshold_in_mask(frame.image, frame.aorta_mask, 0.70);
            auto sel = select_catheter<float>(kmeans(points, 2, substream(808, total)), points, 64, 64);
            if (std::hypot(sel.centroid.x - tx, sel.centroid.y - ty) <= 3.0) ++within;
            ++total;
        }
    }
    report(8, total == 50 && within * 5 >= total * 4,
           "baseline centroid within 3 px of the catheter in >= 80% of 50 frames",
           std::to_string(within) + "/" + std::to_string(total));
}

void criterion_9_memory(const fs::path& work, const OverfitArtifacts& art) {
    RunConfig cfg = art.train_cfg;
    cfg.dataset = (work / "long_ds").string();
    cfg.out = (work / "memory").string();
    cfg.sequences = 1;
    cfg.frames = 50;
    generate_dataset(cfg);
    auto model = SegModel<float>::init(cfg.model_config(), cfg.seed);
    model.load(art.checkpoint);
    auto r = run_inference(cfg, model);

    bool ok = r.trace.size() == 49;
    size_t admissions = 0;
    std::vector<size_t> queue;  // FIFO replay from the trace
    for (const auto& row : r.trace) {
        if (row.admitted) {
            ++admissions;
            ok = ok && row.dice >= cfg.memory_threshold;
            bool was_full = queue.size() == cfg.memory_capacity;
            ok = ok && row.evicted == was_full;
            if (was_full) queue.erase(queue.begin());
            queue.push_back(row.frame);
        } else {
            ok = ok && !row.evicted;
        }
        ok = ok && row.size_after == queue.size() && queue.size() <= cfg.memory_capacity;
    }
    ok = ok && admissions > cfg.memory_capacity;  // evictions actually exercised
    report(9, ok, "memory contract over a 50-frame run (capacity, threshold, FIFO)",
           std::to_string(admissions) + " admissions");
}

void criterion_10_determinism(const fs::path& work) {
    auto run = [&](const std::string& name) {
        RunConfig cfg;
        cfg.dataset = (work / name / "ds").string();
        cfg.out = (work / name / "out").string();
        cfg.checkpoint = (work / name / "out/model.ckpt").string();
        cfg.sequences = 2;
        cfg.frames = 4;
        cfg.steps = 100;
        cfg.seed = 515;
        generate_dataset(cfg);
        auto tr = train_model(cfg);
        auto model = SegModel<float>::init(cfg.model_config(), cfg.seed);
        model.load(tr.checkpoint_path);
        auto ev = evaluate_predictions(cfg, run_inference(cfg, model).prediction_root);
        return std::tuple{cfg, tr, ev};
    };
    auto [cfg_a, tr_a, ev_a] = run("det_a");
    auto [cfg_b, tr_b, ev_b] = run("det_b");

    bool ok = slurp(ev_a.report_path) == slurp(ev_b.report_path) &&
              slurp(tr_a.loss_log_path) == slurp(tr_b.loss_log_path) &&
              slurp(tr_a.checkpoint_path) == slurp(tr_b.checkpoint_path) &&
              slurp(cfg_a.dataset + "/manifest.json") == slurp(cfg_b.dataset + "/manifest.json");

    // round trips: dataset tensor and checkpoint re-serialize bit-exact
    std::string frame = cfg_a.dataset + "/seq_0/frame_0.tns";
    save_tensor((work / "roundtrip.tns").string(), load_tensor<float>(frame));
    ok = ok && slurp((work / "roundtrip.tns").string()) == slurp(frame);
    auto model = SegModel<float>::init(cfg_a.model_config(), cfg_a.seed);
    model.load(tr_a.checkpoint_path);
    model.save((work / "ckpt_a.tns").string());
    auto model2 = SegModel<float>::init(cfg_a.model_config(), 999);
    model2.load((work / "ckpt_a.tns").string());
    model2.save((work / "ckpt_b.tns").string());
    ok = ok && slurp((work / "ckpt_a.tns").string()) == slurp((work / "ckpt_b.tns").string());

    report(10, ok, "determinism & persistence: byte-identical seeded runs and round trips");
}

} // namespace

int main() {
    fs::path work = fs::temp_directory_path() / "aia_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    auto t0 = std::chrono::steady_clock::now();
    criterion_1_gradients();
    criterion_2_degeneracy();
    criterion_3_equation_oracles();
    criterion_4_shape_contract();
    auto art = criterion_5_overfit(work);
    criterion_6_generalization(work, art);
    criterion_7_ap_oracle();
    criterion_8_baseline();
    criterion_9_memory(work, art);
    criterion_10_determinism(work);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0);

    fs::remove_all(work);
    std::printf("%d/10 criteria passed in %llds\n", 10 - failures,
                static_cast<long long>(secs.count()));
    return failures == 0 ? 0 : 1;
}

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aiareseg/cluster.hpp"
#include "aiareseg/dataset.hpp"
#include "aiareseg/losses.hpp"
#include "aiareseg/metrics.hpp"
#include "aiareseg/model.hpp"
#include "aiareseg/optim.hpp"

namespace aia {

struct config_error : std::runtime_error {
    explicit config_error(const std::string& m) : std::runtime_error("config: " + m) {}
};

enum class TargetClass { aorta, catheter };

inline TargetClass parse_target(const std::string& s) {
    if (s == "aorta") return TargetClass::aorta;
    if (s == "catheter") return TargetClass::catheter;
    throw config_error("target must be 'aorta' or 'catheter', got '" + s + "'");
}

inline std::string target_name(TargetClass t) {
    return t == TargetClass::aorta ? "aorta" : "catheter";
}

// Flat key=value run configuration; one target class per run.
struct RunConfig {
    // model dims
    size_t image_size = 64;
    size_t channels = 64;
    size_t heads = 4;
    size_t inner_width = 64;

    // data
    size_t sequences = 4;
    size_t frames = 8;
    std::string dataset;  // dataset root
    std::string out = "out";
    std::string checkpoint;        // path written by train / read by infer
    std::string resume;            // optional checkpoint to continue from
    TargetClass target = TargetClass::catheter;

    // optimization
    size_t steps = 200;
    double lr = 3e-3;
    size_t warmup_steps = 50;   // linear warmup, then inverse-sqrt decay
    double grad_clip = 5.0;     // global-norm gradient clip
    size_t checkpoint_every = 100;  // steps
    uint64_t seed = 0;

    // loss
    LossConfig loss;

    // memory / temporal sampling
    size_t memory_capacity = 3;
    double memory_threshold = 0.7;
    size_t intermediate_gap = 2;

    ModelConfig model_config() const {
        ModelConfig m;
        m.image_size = image_size;
        m.channels = channels;
        m.heads = heads;
        m.inner_width = inner_width;
        return m;
    }

    void validate() const {
        model_config().validate();
        loss.validate();
        if (sequences == 0 || frames == 0) throw config_error("sequences and frames must be positive");
        if (lr <= 0) throw config_error("learning rate must be positive");
        if (grad_clip <= 0) throw config_error("grad_clip must be positive");
        if (memory_threshold < 0 || memory_threshold > 1)
            throw config_error("memory threshold must be in [0,1]");
        if (checkpoint_every == 0) throw config_error("checkpoint_every must be positive");
    }
};

namespace detail_cfg {

inline uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "' needs an unsigned integer, got '" + v + "'");
    }
}

inline double parse_f64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "' needs a number, got '" + v + "'");
    }
}

} // namespace detail_cfg

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    using detail_cfg::parse_f64;
    using detail_cfg::parse_u64;
    if (key == "image_size") cfg.image_size = parse_u64(key, value);
    else if (key == "channels") cfg.channels = parse_u64(key, value);
    else if (key == "heads") cfg.heads = parse_u64(key, value);
    else if (key == "inner_width") cfg.inner_width = parse_u64(key, value);
    else if (key == "sequences") cfg.sequences = parse_u64(key, value);
    else if (key == "frames") cfg.frames = parse_u64(key, value);
    else if (key == "dataset") cfg.dataset = value;
    else if (key == "out") cfg.out = value;
    else if (key == "checkpoint") cfg.checkpoint = value;
    else if (key == "resume") cfg.resume = value;
    else if (key == "target") cfg.target = parse_target(value);
    else if (key == "steps") cfg.steps = parse_u64(key, value);
    else if (key == "lr") cfg.lr = parse_f64(key, value);
    else if (key == "warmup_steps") cfg.warmup_steps = parse_u64(key, value);
    else if (key == "grad_clip") cfg.grad_clip = parse_f64(key, value);
    else if (key == "checkpoint_every") cfg.checkpoint_every = parse_u64(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "w_dice") cfg.loss.w_dice = parse_f64(key, value);
    else if (key == "w_bce") cfg.loss.w_bce = parse_f64(key, value);
    else if (key == "w_mse") cfg.loss.w_mse = parse_f64(key, value);
    else if (key == "memory_capacity") cfg.memory_capacity = parse_u64(key, value);
    else if (key == "memory_threshold") cfg.memory_threshold = parse_f64(key, value);
    else if (key == "intermediate_gap") cfg.intermediate_gap = parse_u64(key, value);
    else throw config_error("unknown key '" + key + "'");
}

// Flat UTF-8 key=value text; '#' starts a comment, blank lines ignored.
inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto strip = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        std::string trimmed = strip(line);
        if (trimmed.empty()) continue;
        auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw config_error(path + ":" + std::to_string(lineno) + ": expected key=value");
        apply_config_entry(cfg, strip(trimmed.substr(0, eq)), strip(trimmed.substr(eq + 1)));
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// generate

// Deterministic dataset: one sequence per index with a cycled tilt angle and
// a seed substream.
inline DatasetManifest generate_dataset(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.dataset.empty()) throw config_error("generate needs a dataset root (key 'dataset')");
    static const int tilts[5] = {0, 30, -30, 60, -60};
    std::vector<std::vector<FrameSample>> sequences;
    std::vector<SequenceSpec> specs;
    for (size_t k = 0; k < cfg.sequences; ++k) {
        SequenceSpec spec;
        spec.frames = cfg.frames;
        spec.image_size = cfg.image_size;
        spec.center_x = spec.center_y = cfg.image_size / 2.0;
        spec.tilt_angle = tilts[k % 5];
        spec.seed = substream(cfg.seed, 0xda7a + k);
        specs.push_back(spec);
        sequences.push_back(generate_sequence(spec));
    }
    return write_dataset(sequences, specs, cfg.dataset);
}

// ---------------------------------------------------------------------------
// train

namespace detail_train {

inline const Tensor32& target_mask(const FrameSample& f, TargetClass t) {
    return t == TargetClass::aorta ? f.aorta_mask : f.catheter_mask;
}

inline Tensor32 as_image(const FrameSample& f, size_t size) {
    return reshape(f.image, Shape{1, size, size});
}

// Linear warmup, then inverse square-root decay anchored at the warmup
// length.  A pure function of the absolute step, so resumed runs replay
// the exact same schedule regardless of how the run is split.
inline double lr_at(const RunConfig& cfg, size_t step) {
    double warmup = static_cast<double>(std::max<size_t>(cfg.warmup_steps, 1));
    double s = static_cast<double>(step + 1);
    if (s < warmup) return cfg.lr * s / warmup;
    return cfg.lr * std::sqrt(warmup / s);
}

// optimizer moments ride along in the checkpoint so resume is bitwise
inline void save_training_state(const std::string& path, const SegModel<float>& model,
                                const AdamState<float>& opt, size_t next_step) {
    auto entries = model.named_params();
    size_t i = 0;
    for (const auto& [name, p] : model.named_params()) {
        entries.emplace("opt/" + name + "/m", Tensor32::from_data(p.shape(), opt.m[i]));
        entries.emplace("opt/" + name + "/v", Tensor32::from_data(p.shape(), opt.v[i]));
        ++i;
    }
    entries.emplace("opt/meta",
                    Tensor32::from_data({2}, {static_cast<float>(next_step),
                                              static_cast<float>(opt.step)}));
    save_checkpoint(path, entries);
}

// returns the step to continue from
inline size_t load_training_state(const std::string& path, SegModel<float>& model,
                                  AdamState<float>& opt) {
    auto entries = load_checkpoint<float>(path);
    model.load_params(entries);
    size_t i = 0;
    for (const auto& [name, p] : model.named_params()) {
        auto m = entries.find("opt/" + name + "/m");
        auto v = entries.find("opt/" + name + "/v");
        if (m == entries.end() || v == entries.end())
            throw io_error("checkpoint: missing optimizer state for " + name);
        opt.m[i] = m->second.data();
        opt.v[i] = v->second.data();
        ++i;
    }
    auto meta = entries.find("opt/meta");
    if (meta == entries.end() || meta->second.size() != 2)
        throw io_error("checkpoint: missing optimizer metadata");
    opt.step = static_cast<long>(meta->second.data()[1]);
    return static_cast<size_t>(meta->second.data()[0]);
}

} // namespace detail_train

struct TrainResult {
    size_t steps_run = 0;
    double final_loss = 0;
    std::string checkpoint_path;
    std::string loss_log_path;
};

// Single-class training over a generated dataset. Per-step sampling is a pure
// function of (seed, step), so a resumed run replays the exact trajectory.
inline TrainResult train_model(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.dataset.empty()) throw config_error("train needs a dataset root (key 'dataset')");
    auto data = read_dataset(cfg.dataset);
    if (data.empty()) throw io_error("dataset has no sequences: " + cfg.dataset);
    for (const auto& seq : data)
        if (seq.empty()) throw io_error("dataset contains an empty sequence");

    std::filesystem::create_directories(cfg.out);
    std::string ckpt = cfg.checkpoint.empty()
                           ? (std::filesystem::path(cfg.out) / "model.ckpt").string()
                           : cfg.checkpoint;
    std::string log_path = (std::filesystem::path(cfg.out) /
                            ("loss_" + target_name(cfg.target) + ".csv"))
                               .string();

    auto model = SegModel<float>::init(cfg.model_config(), cfg.seed);
    auto params = model.params();
    AdamState<float> opt;
    opt.lr = static_cast<float>(cfg.lr);
    opt.init(params);

    size_t start_step = 0;
    bool resumed = false;
    if (!cfg.resume.empty()) {
        start_step = detail_train::load_training_state(cfg.resume, model, opt);
        resumed = true;
    }

    std::ofstream log(log_path, resumed ? std::ios::app : std::ios::trunc);
    if (!log) throw io_error("cannot open loss log: " + log_path);
    if (!resumed) log << "step,loss,dice,bce,mse\n";

    ReferenceMemory<float> no_memory;
    double last_loss = 0;
    for (size_t step = start_step; step < cfg.steps; ++step) {
        Rng draw(substream(cfg.seed, 0x57e9 + step));
        const auto& seq = data[draw.next_below(data.size())];
        size_t t = draw.next_below(seq.size());
        // sample the reference gap from {1..K}: at inference the intermediate
        // frame is usually the directly preceding admitted one, so training
        // only on gap K would leave that distribution uncovered
        size_t gap = 1 + draw.next_below(std::max<size_t>(cfg.intermediate_gap, 1));
        size_t ti = t >= gap ? t - gap : 0;
        const auto& search = seq[t];
        const auto& initial = seq[0];
        const auto& inter = seq[ti];

        // half the steps offer a detached prediction of an earlier frame to a
        // fresh memory, so inference-time key/value concatenation is on-policy;
        // the dice gate keeps the memory empty until predictions are usable
        ReferenceMemory<float> memory;
        memory.capacity = cfg.memory_capacity;
        memory.threshold = cfg.memory_threshold;
        if (t >= 1 && draw.next_below(2) == 1) {
            size_t u = draw.next_below(t);
            size_t ui = u >= cfg.intermediate_gap ? u - cfg.intermediate_gap : 0;
            auto aux = model.forward(detail_train::as_image(seq[u], cfg.image_size),
                                     detail_train::as_image(initial, cfg.image_size),
                                     detail_train::target_mask(initial, cfg.target),
                                     detail_train::as_image(seq[ui], cfg.image_size),
                                     detail_train::target_mask(seq[ui], cfg.target), no_memory);
            auto aux_mask = binarize(aux.prob);
            double aux_dice = dsc_metric(
                aux_mask, reshape(detail_train::target_mask(seq[u], cfg.target),
                                  Shape{1, cfg.image_size, cfg.image_size}));
            memory.update(aux.search_tokens, aux_mask, aux_dice);
        }

        for (auto& p : params) p.zero_grad();
        auto out = model.forward(detail_train::as_image(search, cfg.image_size),
                                 detail_train::as_image(initial, cfg.image_size),
                                 detail_train::target_mask(initial, cfg.target),
                                 detail_train::as_image(inter, cfg.image_size),
                                 detail_train::target_mask(inter, cfg.target), memory);
        auto truth = reshape(detail_train::target_mask(search, cfg.target),
                             Shape{1, cfg.image_size, cfg.image_size});
        auto dice = dice_loss(out.prob, truth, static_cast<float>(cfg.loss.dice_eps));
        auto bce = bce_loss(out.prob, truth);
        auto mse = mse_loss(out.prob, truth);
        auto loss = add(add(scale(dice, static_cast<float>(cfg.loss.w_dice)),
                            scale(bce, static_cast<float>(cfg.loss.w_bce))),
                        scale(mse, static_cast<float>(cfg.loss.w_mse)));
        last_loss = loss.data()[0];
        if (!std::isfinite(last_loss))
            throw numeric_error("training loss is not finite at step " + std::to_string(step));
        backward(loss);
        clip_gradients(params, cfg.grad_clip);
        opt.lr = static_cast<float>(detail_train::lr_at(cfg, step));
        adam_step(params, opt);
        log << step << ',' << last_loss << ',' << dice.data()[0] << ',' << bce.data()[0] << ','
            << mse.data()[0] << '\n';
        if ((step + 1) % cfg.checkpoint_every == 0)
            detail_train::save_training_state(ckpt, model, opt, step + 1);
    }
    detail_train::save_training_state(ckpt, model, opt, cfg.steps);
    log.flush();
    return {cfg.steps - start_step, last_loss, ckpt, log_path};
}

// ---------------------------------------------------------------------------
// infer

struct MemoryTraceRow {
    size_t sequence = 0;
    size_t frame = 0;
    double dice = 0;
    bool admitted = false;
    bool evicted = false;  // an older entry was displaced by this admission
    size_t size_after = 0;
};

struct InferResult {
    std::vector<MemoryTraceRow> trace;
    std::string prediction_root;
};

// Frame-by-frame inference over every dataset sequence. The first frame uses
// the ground-truth mask as the initial reference; the intermediate reference
// is the most recent admitted frame, falling back to the initial frame.
inline InferResult run_inference(const RunConfig& cfg, SegModel<float>& model) {
    cfg.validate();
    auto data = read_dataset(cfg.dataset);
    if (data.empty()) throw io_error("dataset has no sequences: " + cfg.dataset);
    std::filesystem::path root = std::filesystem::path(cfg.out) / "predictions";
    InferResult result;
    result.prediction_root = root.string();

    for (size_t k = 0; k < data.size(); ++k) {
        const auto& seq = data[k];
        if (seq.empty()) throw io_error("dataset contains an empty sequence");
        std::filesystem::path sdir = root / ("seq_" + std::to_string(k));
        std::filesystem::create_directories(sdir);

        ReferenceMemory<float> memory;
        memory.capacity = cfg.memory_capacity;
        memory.threshold = cfg.memory_threshold;
        size_t last_admitted = 0;  // frame index of the newest admitted entry
        // intermediate reference mask: ground truth for frame 0, afterwards
        // the predicted mask of the newest admitted frame
        Tensor32 inter_mask = detail_train::target_mask(seq[0], cfg.target);

        for (size_t t = 0; t < seq.size(); ++t) {
            const auto& initial = seq[0];
            const auto& inter = seq[last_admitted];
            auto out = model.forward(detail_train::as_image(seq[t], cfg.image_size),
                                     detail_train::as_image(initial, cfg.image_size),
                                     detail_train::target_mask(initial, cfg.target),
                                     detail_train::as_image(inter, cfg.image_size),
                                     inter_mask, memory);
            for (float v : out.prob.data())
                if (!std::isfinite(v))
                    throw numeric_error("inference produced a non-finite probability at frame " +
                                        std::to_string(t));
            auto mask = binarize(out.prob);
            std::string stem = (sdir / ("frame_" + std::to_string(t))).string();
            save_tensor(stem + "_prob.tns", out.prob);
            save_tensor(stem + "_mask.tns", mask);

            if (t > 0) {
                double dice = dsc_metric(
                    mask, reshape(detail_train::target_mask(seq[t], cfg.target),
                                  Shape{1, cfg.image_size, cfg.image_size}));
                bool full = memory.size() == memory.capacity;
                bool admitted = memory.update(out.search_tokens, mask, dice);
                if (admitted) {
                    last_admitted = t;
                    inter_mask = reshape(mask, Shape{cfg.image_size, cfg.image_size});
                }
                result.trace.push_back({k, t, dice, admitted, admitted && full, memory.size()});
            }
        }
    }

    std::ofstream trace_csv(root / "memory_trace.csv");
    trace_csv << "sequence,frame,dice,admitted,evicted,size\n";
    for (const auto& r : result.trace)
        trace_csv << r.sequence << ',' << r.frame << ',' << r.dice << ',' << (r.admitted ? 1 : 0)
                  << ',' << (r.evicted ? 1 : 0) << ',' << r.size_after << '\n';
    return result;
}

// ---------------------------------------------------------------------------
// eval

struct EvalResult {
    std::vector<MetricRow> rows;
    MetricSummary summary;
    std::string report_path;
};

// Score stored predictions against the dataset truth; detection boxes come
// from the binarized masks, scored by the mean probability inside the mask.
inline EvalResult evaluate_predictions(const RunConfig& cfg, const std::string& prediction_root) {
    cfg.validate();
    auto data = read_dataset(cfg.dataset);
    EvalResult result;
    std::vector<std::optional<ScoredBox>> detections;
    std::vector<std::optional<BBox>> truths;

    for (size_t k = 0; k < data.size(); ++k) {
        std::filesystem::path sdir =
            std::filesystem::path(prediction_root) / ("seq_" + std::to_string(k));
        for (size_t t = 0; t < data[k].size(); ++t) {
            std::string stem = (sdir / ("frame_" + std::to_string(t))).string();
            if (!std::filesystem::exists(stem + "_prob.tns"))
                throw io_error("missing prediction: " + stem + "_prob.tns");
            auto prob = load_tensor<float>(stem + "_prob.tns");
            auto truth = reshape(detail_train::target_mask(data[k][t], cfg.target),
                                 Shape{1, cfg.image_size, cfg.image_size});
            auto mask = binarize(prob);
            MetricRow row;
            row.sequence = "seq_" + std::to_string(k);
            row.frame = t;
            row.dsc = dsc_metric(mask, truth);
            row.mae = mae_metric(prob, truth);
            result.rows.push_back(row);

            auto pred_box = mask_to_bbox(mask);
            if (pred_box) {
                double score = 0, n = 0;
                for (size_t i = 0; i < mask.size(); ++i)
                    if (mask.data()[i] != 0) {
                        score += prob.data()[i];
                        ++n;
                    }
                detections.push_back(ScoredBox{score / n, *pred_box});
            } else {
                detections.push_back(std::nullopt);
            }
            truths.push_back(mask_to_bbox(truth));
        }
    }

    result.summary.ap50 = average_precision(detections, truths, 0.50);
    result.summary.ap75 = average_precision(detections, truths, 0.75);
    result.summary.map = mean_ap(detections, truths);
    std::filesystem::create_directories(cfg.out);
    result.report_path = (std::filesystem::path(cfg.out) /
                          ("metrics_" + target_name(cfg.target) + ".csv"))
                             .string();
    write_metric_report(result.report_path, result.rows, result.summary);
    return result;
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineRow {
    size_t sequence = 0;
    size_t frame = 0;
    bool applicable = false;
    double dsc = 0;
    double mae = 0;
    double centroid_x = 0, centroid_y = 0;
    double selected_var_rms = 0;
};

struct BaselineResult {
    std::vector<BaselineRow> rows;
    std::string report_path;
};

// Clustering baseline over every frame: threshold inside the aorta mask,
// K-means (K=2), pick the minimum-VAR_rms cluster as the catheter.
inline BaselineResult run_baseline(const RunConfig& cfg) {
    cfg.validate();
    auto data = read_dataset(cfg.dataset);
    if (data.empty()) throw io_error("dataset has no sequences: " + cfg.dataset);
    std::filesystem::path root = std::filesystem::path(cfg.out) / "baseline";
    BaselineResult result;

    for (size_t k = 0; k < data.size(); ++k) {
        std::filesystem::path sdir = root / ("seq_" + std::to_string(k));
        std::filesystem::create_directories(sdir);
        for (size_t t = 0; t < data[k].size(); ++t) {
            const auto& f = data[k][t];
            BaselineRow row;
            row.sequence = k;
            row.frame = t;
            try {
                auto pts = threshold_in_mask(f.image, f.aorta_mask, 0.70);
                auto clusters = kmeans(pts, 2, substream(cfg.seed, 0xba5e + k * 1000 + t));
                auto sel = select_catheter<float>(clusters, pts, cfg.image_size, cfg.image_size);
                row.applicable = true;
                row.dsc = dsc_metric(sel.mask, f.catheter_mask);
                row.mae = mae_metric(sel.mask, f.catheter_mask);
                row.centroid_x = sel.centroid.x;
                row.centroid_y = sel.centroid.y;
                row.selected_var_rms = clusters.var_rms[sel.index];
                save_tensor((sdir / ("frame_" + std::to_string(t) + "_mask.tns")).string(),
                            sel.mask);
            } catch (const baseline_error&) {
                row.applicable = false;
            }
            result.rows.push_back(row);
        }
    }

    result.report_path = (root / "baseline.csv").string();
    std::ofstream csv(result.report_path);
    csv << "sequence,frame,applicable,dsc,mae,centroid_x,centroid_y,var_rms\n";
    for (const auto& r : result.rows) {
        csv << r.sequence << ',' << r.frame << ',';
        if (r.applicable)
            csv << 1 << ',' << r.dsc << ',' << r.mae << ',' << r.centroid_x << ','
                << r.centroid_y << ',' << r.selected_var_rms << '\n';
        else
            csv << "0,,,,,\n";
    }
    return result;
}

} // namespace aia

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "aiareseg/train.hpp"

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::string target;
    std::string checkpoint;
    std::optional<uint64_t> seed;
};

void add_common_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "key=value configuration file");
    cmd->add_option("--seed", f.seed, "seed override (unsigned 64-bit)");
    cmd->add_option("--out", f.out, "output directory override");
    cmd->add_option("--target", f.target, "target class: aorta or catheter");
    cmd->add_option("--checkpoint", f.checkpoint, "checkpoint path override");
}

aia::RunConfig make_config(const Flags& f) {
    aia::RunConfig cfg = f.config.empty() ? aia::RunConfig{} : aia::load_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (!f.out.empty()) cfg.out = f.out;
    if (!f.target.empty()) cfg.target = aia::parse_target(f.target);
    if (!f.checkpoint.empty()) cfg.checkpoint = f.checkpoint;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"AiAReSeg: attention-in-attention temporal segmentation toolkit"};
    app.require_subcommand(1);

    Flags flags;
    auto* cmd_generate = app.add_subcommand("generate", "write a synthetic dataset");
    auto* cmd_train = app.add_subcommand("train", "train a single-class model");
    auto* cmd_infer = app.add_subcommand("infer", "run inference over a dataset");
    auto* cmd_eval = app.add_subcommand("eval", "score stored predictions");
    auto* cmd_baseline = app.add_subcommand("baseline", "k-means clustering baseline");
    for (auto* c : {cmd_generate, cmd_train, cmd_infer, cmd_eval, cmd_baseline})
        add_common_flags(c, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        aia::RunConfig cfg = make_config(flags);
        if (cmd_generate->parsed()) {
            auto manifest = aia::generate_dataset(cfg);
            std::cout << "wrote " << manifest.sequences.size() << " sequences ("
                      << manifest.total_frames << " frames) to " << cfg.dataset << "\n";
        } else if (cmd_train->parsed()) {
            auto r = aia::train_model(cfg);
            std::cout << "trained " << r.steps_run << " steps, final loss " << r.final_loss
                      << "\ncheckpoint: " << r.checkpoint_path << "\nloss log: " << r.loss_log_path
                      << "\n";
        } else if (cmd_infer->parsed()) {
            if (cfg.checkpoint.empty())
                throw aia::config_error("infer needs --checkpoint (or the 'checkpoint' key)");
            auto model = aia::SegModel<float>::init(cfg.model_config(), cfg.seed);
            model.load(cfg.checkpoint);
            auto r = aia::run_inference(cfg, model);
            std::cout << "predictions: " << r.prediction_root << " (" << r.trace.size()
                      << " memory trace rows)\n";
        } else if (cmd_eval->parsed()) {
            std::string preds =
                (std::filesystem::path(cfg.out) / "predictions").string();
            auto r = aia::evaluate_predictions(cfg, preds);
            std::cout << "frames: " << r.rows.size() << "  ap50: " << r.summary.ap50
                      << "  ap75: " << r.summary.ap75 << "  map: " << r.summary.map
                      << "\nreport: " << r.report_path << "\n";
        } else if (cmd_baseline->parsed()) {
            auto r = aia::run_baseline(cfg);
            size_t ok = 0;
            for (const auto& row : r.rows)
                if (row.applicable) ++ok;
            std::cout << "baseline rows: " << r.rows.size() << " (" << ok
                      << " applicable)\nreport: " << r.report_path << "\n";
        }
        return 0;
    } catch (const aia::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const aia::spec_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const aia::contract_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const aia::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const aia::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

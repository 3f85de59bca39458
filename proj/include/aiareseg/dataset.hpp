#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aiareseg/serialize.hpp"
#include "aiareseg/synth.hpp"

namespace aia {

// Layout on disk:
//   root/manifest.json
//   root/seq_<k>/frame_<i>.tns + frame_<i>_aorta.tns + frame_<i>_cath.tns
struct SequenceEntry {
    std::string directory;
    size_t frame_count = 0;
    SequenceSpec spec;
    std::vector<size_t> filtered_frames;  // frames without a catheter pixel
};

struct DatasetManifest {
    int format_version = 1;
    std::vector<SequenceEntry> sequences;
    size_t total_frames = 0;
    size_t total_filtered = 0;
};

namespace detail_ds {

inline nlohmann::json spec_to_json(const SequenceSpec& s) {
    return {
        {"frames", s.frames},
        {"image_size", s.image_size},
        {"center_x", s.center_x},
        {"center_y", s.center_y},
        {"drift_amp_x", s.drift_amp_x},
        {"drift_amp_y", s.drift_amp_y},
        {"semi_axis_a", s.semi_axis_a},
        {"semi_axis_b", s.semi_axis_b},
        {"axis_wobble", s.axis_wobble},
        {"wall_thickness", s.wall_thickness},
        {"catheter_radius", s.catheter_radius},
        {"catheter_peak", s.catheter_peak},
        {"catheter_orbit", s.catheter_orbit},
        {"catheter_angular_rate", s.catheter_angular_rate},
        {"intensity_background", s.intensity_background},
        {"intensity_lumen", s.intensity_lumen},
        {"intensity_wall", s.intensity_wall},
        {"speckle_sigma", s.speckle_sigma},
        {"speckle_smooth", s.speckle_smooth},
        {"shadow_probability", s.shadow_probability},
        {"shadow_half_angle_deg", s.shadow_half_angle_deg},
        {"tilt_angle", s.tilt_angle},
        {"seed", s.seed},
    };
}

inline SequenceSpec spec_from_json(const nlohmann::json& j) {
    SequenceSpec s;
    s.frames = j.at("frames");
    s.image_size = j.at("image_size");
    s.center_x = j.at("center_x");
    s.center_y = j.at("center_y");
    s.drift_amp_x = j.at("drift_amp_x");
    s.drift_amp_y = j.at("drift_amp_y");
    s.semi_axis_a = j.at("semi_axis_a");
    s.semi_axis_b = j.at("semi_axis_b");
    s.axis_wobble = j.at("axis_wobble");
    s.wall_thickness = j.at("wall_thickness");
    s.catheter_radius = j.at("catheter_radius");
    s.catheter_peak = j.at("catheter_peak");
    s.catheter_orbit = j.at("catheter_orbit");
    s.catheter_angular_rate = j.at("catheter_angular_rate");
    s.intensity_background = j.at("intensity_background");
    s.intensity_lumen = j.at("intensity_lumen");
    s.intensity_wall = j.at("intensity_wall");
    s.speckle_sigma = j.at("speckle_sigma");
    s.speckle_smooth = j.at("speckle_smooth");
    s.shadow_probability = j.at("shadow_probability");
    s.shadow_half_angle_deg = j.at("shadow_half_angle_deg");
    s.tilt_angle = j.at("tilt_angle");
    s.seed = j.at("seed");
    return s;
}

} // namespace detail_ds

inline DatasetManifest write_dataset(const std::vector<std::vector<FrameSample>>& sequences,
                                     const std::vector<SequenceSpec>& specs,
                                     const std::string& root) {
    namespace fs = std::filesystem;
    if (sequences.size() != specs.size())
        throw contract_error("write_dataset: sequence/spec count mismatch");
    fs::create_directories(root);

    DatasetManifest manifest;
    nlohmann::json jseqs = nlohmann::json::array();
    for (size_t k = 0; k < sequences.size(); ++k) {
        SequenceEntry entry;
        entry.directory = "seq_" + std::to_string(k);
        entry.frame_count = sequences[k].size();
        entry.spec = specs[k];
        fs::create_directories(fs::path(root) / entry.directory);
        for (size_t i = 0; i < sequences[k].size(); ++i) {
            const auto& f = sequences[k][i];
            auto base = (fs::path(root) / entry.directory / ("frame_" + std::to_string(i))).string();
            save_tensor(base + ".tns", f.image);
            save_tensor(base + "_aorta.tns", f.aorta_mask);
            save_tensor(base + "_cath.tns", f.catheter_mask);
            if (!f.has_catheter()) entry.filtered_frames.push_back(i);
        }
        manifest.total_frames += entry.frame_count;
        manifest.total_filtered += entry.filtered_frames.size();
        jseqs.push_back({{"directory", entry.directory},
                         {"frame_count", entry.frame_count},
                         {"spec", detail_ds::spec_to_json(entry.spec)},
                         {"seed", entry.spec.seed},
                         {"filtered_frames", entry.filtered_frames}});
        manifest.sequences.push_back(std::move(entry));
    }
    nlohmann::json j = {{"format_version", manifest.format_version},
                        {"sequences", jseqs},
                        {"total_frames", manifest.total_frames},
                        {"total_filtered", manifest.total_filtered}};
    std::ofstream f(fs::path(root) / "manifest.json");
    f << j.dump(2) << "\n";
    if (!f) throw io_error("cannot write manifest under " + root);
    return manifest;
}

inline DatasetManifest read_manifest(const std::string& root) {
    namespace fs = std::filesystem;
    auto path = fs::path(root) / "manifest.json";
    std::ifstream f(path);
    if (!f) throw io_error("cannot open " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error("parse error in " + path.string() + ": " + e.what());
    }
    DatasetManifest manifest;
    manifest.format_version = j.at("format_version");
    manifest.total_frames = j.at("total_frames");
    manifest.total_filtered = j.at("total_filtered");
    for (const auto& js : j.at("sequences")) {
        SequenceEntry entry;
        entry.directory = js.at("directory");
        entry.frame_count = js.at("frame_count");
        entry.spec = detail_ds::spec_from_json(js.at("spec"));
        entry.filtered_frames = js.at("filtered_frames").get<std::vector<size_t>>();
        manifest.sequences.push_back(std::move(entry));
    }
    return manifest;
}

inline std::vector<FrameSample> read_sequence(const std::string& root, const SequenceEntry& entry) {
    namespace fs = std::filesystem;
    std::vector<FrameSample> frames;
    for (size_t i = 0; i < entry.frame_count; ++i) {
        auto base = (fs::path(root) / entry.directory / ("frame_" + std::to_string(i))).string();
        FrameSample f;
        f.image = load_tensor<float>(base + ".tns");
        f.aorta_mask = load_tensor<float>(base + "_aorta.tns");
        f.catheter_mask = load_tensor<float>(base + "_cath.tns");
        f.frame_index = i;
        frames.push_back(std::move(f));
    }
    return frames;
}

inline std::vector<std::vector<FrameSample>> read_dataset(const std::string& root) {
    auto manifest = read_manifest(root);
    std::vector<std::vector<FrameSample>> sequences;
    for (const auto& entry : manifest.sequences) sequences.push_back(read_sequence(root, entry));
    return sequences;
}

} // namespace aia

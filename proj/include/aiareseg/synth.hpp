#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiareseg/rng.hpp"
#include "aiareseg/tensor.hpp"

namespace aia {

struct spec_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Procedural axial ultrasound stand-in: bright-walled ellipse (aorta) drifting
// smoothly, a small bright catheter dot inside the lumen, multiplicative
// smoothed speckle, and an optional acoustic-shadow wedge below the upper wall.
struct SequenceSpec {
    size_t frames = 8;
    size_t image_size = 64;

    // aorta ellipse trajectory
    double center_x = 32, center_y = 32;          // initial center, pixels
    double drift_amp_x = 3, drift_amp_y = 2;      // sinusoidal drift amplitude
    double semi_axis_a = 14, semi_axis_b = 11;    // lumen semi-axes, pixels
    double axis_wobble = 0.5;                     // per-frame semi-axis modulation
    double wall_thickness = 3;

    // catheter path inside the lumen
    double catheter_radius = 2;        // 1..3 px
    double catheter_peak = 1.0;        // peak intensity
    double catheter_orbit = 0.45;      // fraction of the safe lumen radius
    double catheter_angular_rate = 0.35;  // radians per frame

    // base intensities
    double intensity_background = 0.15;
    double intensity_lumen = 0.35;
    double intensity_wall = 0.75;

    // speckle
    double speckle_sigma = 0.2;
    size_t speckle_smooth = 2;  // box half-width, pixels

    // shadow wedge
    double shadow_probability = 0.0;
    double shadow_half_angle_deg = 20;

    int tilt_angle = 0;  // degrees, one of {0, +-30, +-60}
    uint64_t seed = 0;

    void validate() const {
        if (tilt_angle != 0 && tilt_angle != 30 && tilt_angle != -30 && tilt_angle != 60 &&
            tilt_angle != -60)
            throw spec_error("tilt_angle must be one of {0, +-30, +-60}, got " +
                             std::to_string(tilt_angle));
        if (frames == 0 || image_size == 0) throw spec_error("frames and image_size must be positive");
        if (catheter_radius < 1 || catheter_radius > 3)
            throw spec_error("catheter_radius must be in [1,3] px");
    }
};

struct FrameSample {
    Tensor32 image;          // [H,W] in [0,1]
    Tensor32 aorta_mask;     // [H,W] binary
    Tensor32 catheter_mask;  // [H,W] binary
    size_t frame_index = 0;

    bool has_catheter() const {
        for (float v : catheter_mask.data())
            if (v > 0.5f) return true;
        return false;
    }
};

namespace detail_synth {

// unit-mean multiplicative speckle field, box-smoothed gaussian noise
inline std::vector<float> speckle_field(size_t H, size_t W, double sigma, size_t smooth,
                                        Rng& rng) {
    std::vector<float> field(H * W, 1.0f);
    if (sigma <= 0) return field;
    std::vector<double> noise(H * W);
    for (auto& v : noise) v = rng.next_normal();
    if (smooth > 0) {
        std::vector<double> tmp(H * W, 0.0);
        long r = static_cast<long>(smooth);
        for (long y = 0; y < static_cast<long>(H); ++y)
            for (long x = 0; x < static_cast<long>(W); ++x) {
                double acc = 0;
                long cnt = 0;
                for (long dy = -r; dy <= r; ++dy)
                    for (long dx = -r; dx <= r; ++dx) {
                        long yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= static_cast<long>(H) || xx < 0 ||
                            xx >= static_cast<long>(W))
                            continue;
                        acc += noise[yy * W + xx];
                        ++cnt;
                    }
                tmp[y * W + x] = acc / cnt;
            }
        noise.swap(tmp);
    }
    // renormalize to zero mean / sigma std so smoothing does not shrink contrast
    double mu = 0;
    for (double v : noise) mu += v;
    mu /= noise.size();
    double var = 0;
    for (double v : noise) var += (v - mu) * (v - mu);
    var /= noise.size();
    double s = var > 0 ? sigma / std::sqrt(var) : 0.0;
    for (size_t i = 0; i < field.size(); ++i)
        field[i] = static_cast<float>(std::max(0.0, 1.0 + (noise[i] - mu) * s));
    return field;
}

} // namespace detail_synth

inline std::vector<FrameSample> generate_sequence(const SequenceSpec& spec) {
    spec.validate();
    size_t H = spec.image_size, W = spec.image_size;
    double tilt = spec.tilt_angle * 3.14159265358979323846 / 180.0;
    double stretch = 1.0 / std::max(0.25, std::cos(tilt));  // oblique cut elongation

    std::vector<FrameSample> out;
    out.reserve(spec.frames);
    for (size_t t = 0; t < spec.frames; ++t) {
        // smooth sinusoidal drift, per-frame displacement bounded by the
        // amplitude times the phase step (<= 2 px for default amplitudes)
        double phase = 0.35 * static_cast<double>(t);
        double cx = spec.center_x + spec.drift_amp_x * std::sin(phase);
        double cy = spec.center_y + spec.drift_amp_y * std::sin(0.7 * phase + 1.0);
        double a = (spec.semi_axis_a + spec.axis_wobble * std::sin(0.5 * phase)) * stretch;
        double b = spec.semi_axis_b + spec.axis_wobble * std::cos(0.6 * phase);
        double a_out = a + spec.wall_thickness;
        double b_out = b + spec.wall_thickness;

        // catheter orbits inside the lumen
        double safe = std::min(a, b) - spec.catheter_radius - 1.0;
        if (safe <= 0)
            throw spec_error("catheter cannot fit inside the lumen at frame " + std::to_string(t));
        double ang = spec.catheter_angular_rate * static_cast<double>(t);
        double orbit = spec.catheter_orbit * safe;
        double kx = cx + orbit * std::cos(ang);
        double ky = cy + orbit * std::sin(ang);
        // reject specs whose path leaves the lumen
        double lum = ((kx - cx) / a) * ((kx - cx) / a) + ((ky - cy) / b) * ((ky - cy) / b);
        if (lum >= 1.0)
            throw spec_error("catheter path exits the lumen at frame " + std::to_string(t));

        Rng frame_rng(substream(spec.seed, t));
        bool shadow_on = frame_rng.next_uniform() < spec.shadow_probability;
        auto speckle =
            detail_synth::speckle_field(H, W, spec.speckle_sigma, spec.speckle_smooth, frame_rng);

        std::vector<float> img(H * W), am(H * W, 0.0f), km(H * W, 0.0f);
        double half_angle = spec.shadow_half_angle_deg * 3.14159265358979323846 / 180.0;
        double apex_y = cy - b_out;  // top of the outer wall
        for (size_t y = 0; y < H; ++y)
            for (size_t x = 0; x < W; ++x) {
                double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
                double r_in = ((px - cx) / a) * ((px - cx) / a) + ((py - cy) / b) * ((py - cy) / b);
                double r_out = ((px - cx) / a_out) * ((px - cx) / a_out) +
                               ((py - cy) / b_out) * ((py - cy) / b_out);
                double v = spec.intensity_background;
                // the aorta mask covers the lumen; the wall is imaged but not
                // part of the vessel interior the catheter swims in
                if (r_in <= 1.0) {
                    v = spec.intensity_lumen;
                    am[y * W + x] = 1.0f;
                } else if (r_out <= 1.0) {
                    v = spec.intensity_wall;
                }
                double dk = std::hypot(px - kx, py - ky);
                if (dk <= spec.catheter_radius && r_in <= 1.0) {
                    v = spec.catheter_peak;
                    km[y * W + x] = 1.0f;
                }
                v *= speckle[y * W + x];
                if (shadow_on && py > apex_y) {
                    double dx = px - cx, dy = py - apex_y;
                    if (std::fabs(std::atan2(dx, dy)) <= half_angle) v = 0.0;
                }
                img[y * W + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }

        FrameSample fs;
        fs.image = Tensor32::from_data({H, W}, std::move(img));
        fs.aorta_mask = Tensor32::from_data({H, W}, std::move(am));
        fs.catheter_mask = Tensor32::from_data({H, W}, std::move(km));
        fs.frame_index = t;
        out.push_back(std::move(fs));
    }
    return out;
}

// --- augmentation ------------------------------------------------------------

struct AugmentParams {
    double rotation_deg = 0;     // [-30, 30]
    double brightness_gain = 1;  // [0.7, 1.3]
};

namespace detail_synth {

inline std::vector<float> rotate_bilinear(const std::vector<float>& src, size_t H, size_t W,
                                          double deg) {
    double rad = deg * 3.14159265358979323846 / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    double cy = (static_cast<double>(H) - 1) / 2.0, cx = (static_cast<double>(W) - 1) / 2.0;
    std::vector<float> dst(H * W, 0.0f);
    for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x) {
            // inverse map
            double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
            double sx = c * dx + s * dy + cx;
            double sy = -s * dx + c * dy + cy;
            long x0 = static_cast<long>(std::floor(sx)), y0 = static_cast<long>(std::floor(sy));
            double fx = sx - x0, fy = sy - y0;
            double acc = 0;
            for (int j = 0; j <= 1; ++j)
                for (int i = 0; i <= 1; ++i) {
                    long xx = x0 + i, yy = y0 + j;
                    if (xx < 0 || xx >= static_cast<long>(W) || yy < 0 ||
                        yy >= static_cast<long>(H))
                        continue;
                    double wgt = (i ? fx : 1 - fx) * (j ? fy : 1 - fy);
                    acc += wgt * src[yy * W + xx];
                }
            dst[y * W + x] = static_cast<float>(acc);
        }
    return dst;
}

} // namespace detail_synth

inline FrameSample augment_unchecked(const FrameSample& frame, const AugmentParams& params) {
    size_t H = frame.image.shape()[0], W = frame.image.shape()[1];
    FrameSample out;
    out.frame_index = frame.frame_index;

    std::vector<float> img = frame.image.data();
    std::vector<float> am = frame.aorta_mask.data();
    std::vector<float> km = frame.catheter_mask.data();
    if (params.rotation_deg != 0.0) {
        img = detail_synth::rotate_bilinear(img, H, W, params.rotation_deg);
        am = detail_synth::rotate_bilinear(am, H, W, params.rotation_deg);
        km = detail_synth::rotate_bilinear(km, H, W, params.rotation_deg);
    }
    for (auto& v : img)
        v = std::clamp(v * static_cast<float>(params.brightness_gain), 0.0f, 1.0f);
    for (auto& v : am) v = v >= 0.5f ? 1.0f : 0.0f;
    for (auto& v : km) v = v >= 0.5f ? 1.0f : 0.0f;
    out.image = Tensor32::from_data({H, W}, std::move(img));
    out.aorta_mask = Tensor32::from_data({H, W}, std::move(am));
    out.catheter_mask = Tensor32::from_data({H, W}, std::move(km));
    return out;
}

// Identical geometric transform on image and both masks; masks re-binarized
// at 0.5 after interpolation. Intensity gain touches the image only.
inline FrameSample augment(const FrameSample& frame, const AugmentParams& params) {
    if (params.rotation_deg < -30.0 || params.rotation_deg > 30.0)
        throw spec_error("augment rotation must be in [-30,30] degrees");
    if (params.brightness_gain < 0.7 || params.brightness_gain > 1.3)
        throw spec_error("augment brightness gain must be in [0.7,1.3]");
    return augment_unchecked(frame, params);
}


} // namespace aia

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "aiareseg/rng.hpp"
#include "aiareseg/tensor.hpp"

namespace aia {

// Raised when the clustering baseline cannot run on a frame (empty mask,
// too few surviving points).
struct baseline_error : std::runtime_error {
    explicit baseline_error(const std::string& m) : std::runtime_error("baseline: " + m) {}
};

struct Point {
    double x = 0;  // column
    double y = 0;  // row
};

using PointSet = std::vector<Point>;

// Pixels inside the mask whose intensity reaches `level` times the maximum
// intensity found inside the mask.
template <typename T>
PointSet threshold_in_mask(const Tensor<T>& image, const Tensor<T>& mask, double level = 0.70) {
    check_same_shape(image, mask, "threshold_in_mask");
    if (level <= 0 || level >= 1) throw contract_error("threshold_in_mask: level must be in (0,1)");
    size_t h, w;
    if (image.rank() == 2) {
        h = image.shape()[0];
        w = image.shape()[1];
    } else if (image.rank() == 3 && image.shape()[0] == 1) {
        h = image.shape()[1];
        w = image.shape()[2];
    } else {
        throw shape_error("threshold_in_mask: expected [H,W] or [1,H,W], got " +
                          shape_str(image.shape()));
    }
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (size_t i = 0; i < image.size(); ++i)
        if (mask.data()[i] != T(0)) {
            any = true;
            mx = std::max(mx, static_cast<double>(image.data()[i]));
        }
    if (!any) throw baseline_error("empty mask, thresholding inapplicable");
    double cut = level * mx;
    PointSet points;
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) {
            size_t i = y * w + x;
            if (mask.data()[i] != T(0) && static_cast<double>(image.data()[i]) >= cut)
                points.push_back({static_cast<double>(x), static_cast<double>(y)});
        }
    return points;
}

// Population variance of a coordinate list, component-wise.
inline std::array<double, 2> cluster_variance(const PointSet& points) {
    if (points.empty()) return {0, 0};
    double mx = 0, my = 0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(points.size());
    my /= static_cast<double>(points.size());
    double vx = 0, vy = 0;
    for (const auto& p : points) {
        vx += (p.x - mx) * (p.x - mx);
        vy += (p.y - my) * (p.y - my);
    }
    vx /= static_cast<double>(points.size());
    vy /= static_cast<double>(points.size());
    return {vx, vy};
}

// Eq.: sqrt(var_x^2 + var_y^2) with population variance.
inline double var_rms(const PointSet& points) {
    auto v = cluster_variance(points);
    return std::sqrt(v[0] * v[0] + v[1] * v[1]);
}

struct ClusterResult {
    std::vector<size_t> assignments;       // per input point, cluster index
    std::vector<Point> centroids;          // one per cluster
    std::vector<std::array<double, 2>> variances;  // (var_x, var_y) per cluster
    std::vector<double> var_rms;           // per cluster
    std::vector<size_t> sizes;             // per cluster

    size_t clusters() const { return centroids.size(); }

    // within-cluster sum of squared distances to the centroids
    double objective(const PointSet& points) const {
        double acc = 0;
        for (size_t i = 0; i < points.size(); ++i) {
            const Point& c = centroids[assignments[i]];
            double dx = points[i].x - c.x, dy = points[i].y - c.y;
            acc += dx * dx + dy * dy;
        }
        return acc;
    }
};

namespace detail_cluster {

inline double sqdist(const Point& a, const Point& b) {
    double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

// k-means++ seeding: first centroid uniform, later ones proportional to the
// squared distance to the nearest chosen centroid.
inline std::vector<Point> seed_centroids(const PointSet& points, size_t k, Rng& rng) {
    std::vector<Point> centroids;
    centroids.push_back(points[rng.next_below(points.size())]);
    std::vector<double> d2(points.size());
    while (centroids.size() < k) {
        double total = 0;
        for (size_t i = 0; i < points.size(); ++i) {
            double best = sqdist(points[i], centroids[0]);
            for (size_t c = 1; c < centroids.size(); ++c)
                best = std::min(best, sqdist(points[i], centroids[c]));
            d2[i] = best;
            total += best;
        }
        size_t pick = 0;
        if (total > 0) {
            double target = rng.next_uniform() * total, run = 0;
            for (size_t i = 0; i < points.size(); ++i) {
                run += d2[i];
                if (run >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.next_below(points.size());  // all points coincide with a centroid
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

} // namespace detail_cluster

namespace detail_cluster {

// One Lloyd run from given centroids: assignment fixpoint or 100 iterations.
inline void lloyd(const PointSet& points, size_t k, std::vector<Point>& centroids,
                  std::vector<size_t>& assign) {
    assign.assign(points.size(), 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (size_t i = 0; i < points.size(); ++i) {
            size_t best = 0;
            double bd = sqdist(points[i], centroids[0]);
            for (size_t c = 1; c < k; ++c) {
                double d = sqdist(points[i], centroids[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        std::vector<Point> sums(k);
        std::vector<size_t> counts(k, 0);
        for (size_t i = 0; i < points.size(); ++i) {
            sums[assign[i]].x += points[i].x;
            sums[assign[i]].y += points[i].y;
            ++counts[assign[i]];
        }
        for (size_t c = 0; c < k; ++c)
            if (counts[c] > 0)
                centroids[c] = {sums[c].x / static_cast<double>(counts[c]),
                                sums[c].y / static_cast<double>(counts[c])};
        if (!changed && iter > 0) break;
    }
}

inline double wcss(const PointSet& points, const std::vector<Point>& centroids,
                   const std::vector<size_t>& assign) {
    double acc = 0;
    for (size_t i = 0; i < points.size(); ++i) acc += sqdist(points[i], centroids[assign[i]]);
    return acc;
}

} // namespace detail_cluster

// K-means with k-means++ initialization; several deterministic restarts are
// drawn from the seed and the lowest-objective run wins.
inline ClusterResult kmeans(const PointSet& points, size_t k, uint64_t seed) {
    if (k == 0) throw contract_error("kmeans: k must be positive");
    if (points.size() < k) throw baseline_error("fewer points than clusters");
    Rng rng(seed);
    std::vector<Point> centroids;
    std::vector<size_t> assign;
    double best_obj = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < 16; ++restart) {
        std::vector<Point> c;
        if (restart == 0 && k == 2) {
            // deterministic candidate: the diameter pair of the point set
            size_t bi = 0, bj = 1;
            double bd = -1;
            for (size_t i = 0; i < points.size(); ++i)
                for (size_t j = i + 1; j < points.size(); ++j) {
                    double d = detail_cluster::sqdist(points[i], points[j]);
                    if (d > bd) {
                        bd = d;
                        bi = i;
                        bj = j;
                    }
                }
            c = {points[bi], points[bj]};
        } else {
            c = detail_cluster::seed_centroids(points, k, rng);
        }
        std::vector<size_t> a;
        detail_cluster::lloyd(points, k, c, a);
        double obj = detail_cluster::wcss(points, c, a);
        if (obj < best_obj) {
            best_obj = obj;
            centroids = std::move(c);
            assign = std::move(a);
        }
    }
    ClusterResult r;
    r.assignments = assign;
    r.centroids = centroids;
    for (size_t c = 0; c < k; ++c) {
        PointSet members;
        for (size_t i = 0; i < points.size(); ++i)
            if (assign[i] == c) members.push_back(points[i]);
        r.sizes.push_back(members.size());
        r.variances.push_back(cluster_variance(members));
        r.var_rms.push_back(var_rms(members));
    }
    return r;
}

template <typename T>
struct SelectedCluster {
    size_t index = 0;
    Point centroid;
    Tensor<T> mask;  // [H,W], selected points rasterized
};

// Pick the cluster with minimal VAR_rms; ties break toward the smaller
// cluster, then the lower index.
template <typename T>
SelectedCluster<T> select_catheter(const ClusterResult& result, const PointSet& points,
                                   size_t height, size_t width) {
    if (result.clusters() == 0) throw contract_error("select_catheter: no clusters");
    size_t best = 0;
    for (size_t c = 1; c < result.clusters(); ++c) {
        if (result.var_rms[c] < result.var_rms[best] ||
            (result.var_rms[c] == result.var_rms[best] && result.sizes[c] < result.sizes[best]))
            best = c;
    }
    SelectedCluster<T> sel;
    sel.index = best;
    sel.centroid = result.centroids[best];
    std::vector<T> data(height * width, T(0));
    for (size_t i = 0; i < points.size(); ++i)
        if (result.assignments[i] == best) {
            size_t x = static_cast<size_t>(points[i].x);
            size_t y = static_cast<size_t>(points[i].y);
            if (x >= width || y >= height)
                throw contract_error("select_catheter: point outside raster bounds");
            data[y * width + x] = T(1);
        }
    sel.mask = Tensor<T>::from_data({height, width}, std::move(data));
    return sel;
}

} // namespace aia

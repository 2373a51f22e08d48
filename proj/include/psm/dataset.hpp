#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psm/errors.hpp"
#include "psm/motion.hpp"

namespace psm {

struct GridSpec {
    double theta_min = 0.0;
    double theta_max = 3.14159265358979323846;
    double omega_min = 0.0;
    double omega_max = 8.0;
    int n_theta = 64;
    int n_omega = 64;
    double smoothing_sigma = 1.5;  // bins; 0 disables smoothing
};

void validate(const GridSpec& spec);

struct DatasetMeta {
    std::vector<std::string> source_labels;
    std::string built_at;  // optional stamp; empty keeps builds byte-reproducible
    std::uint64_t total_samples = 0;
    std::uint64_t clamped_samples = 0;
};

// Smoothed, normalized occupancy over the (theta_g, omega) plane. Bins are
// row-major with theta as the slow index.
class SafetyDataset {
public:
    SafetyDataset(GridSpec spec, std::vector<double> p, DatasetMeta meta);

    const GridSpec& spec() const noexcept { return spec_; }
    const std::vector<double>& p() const noexcept { return p_; }
    const DatasetMeta& meta() const noexcept { return meta_; }
    DatasetMeta& meta() noexcept { return meta_; }

    double at(int it, int iw) const { return p_[static_cast<std::size_t>(it) * spec_.n_omega + iw]; }
    double theta_center(int it) const;
    double omega_center(int iw) const;
    double theta_width() const;
    double omega_width() const;

private:
    GridSpec spec_;
    std::vector<double> p_;
    DatasetMeta meta_;
};

// Raw bin counts (doubles, pre-smoothing). States outside the grid are
// clamped to the nearest edge bin and counted via *clamped.
std::vector<double> histogram_states(const std::vector<GravityAngleState>& states,
                                     const GridSpec& spec, std::uint64_t* clamped = nullptr);

// Separable Gaussian blur with reflected boundaries; kernel radius is
// ceil(4 sigma). The kernel is normalized, so a uniform grid stays put.
std::vector<double> smooth_reflect(const std::vector<double>& grid, const GridSpec& spec);

// Histogram -> smooth -> normalize over every oriented sample in `traces`.
SafetyDataset build_distribution(const std::vector<MotionTrace>& traces, const GridSpec& spec);

// Bilinear interpolation between bin centers; exactly 0 outside the grid.
double query_probability(const SafetyDataset& ds, const GravityAngleState& state);

// Highest-probability bin center inside the axis-aligned ellipse around
// `state`. Ties break toward the closer bin, then smaller theta, then
// smaller omega. Empty when every reachable bin carries zero mass.
std::optional<GravityAngleState> safest_neighbor(const SafetyDataset& ds,
                                                 const GravityAngleState& state,
                                                 double radius_theta, double radius_omega);

// Versioned little-endian binary image; bit-exact round trip.
std::vector<std::uint8_t> save_dataset(const SafetyDataset& ds);
SafetyDataset load_dataset(std::span<const std::uint8_t> bytes);

void save_dataset_file(const SafetyDataset& ds, const std::string& path);
SafetyDataset load_dataset_file(const std::string& path);

}  // namespace psm

#include "psm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "psm/dsp.hpp"

namespace psm {

void validate(const GridSpec& spec) {
    if (!(spec.theta_min < spec.theta_max) || !(spec.omega_min < spec.omega_max)) {
        throw DatasetError(DatasetError::Kind::InvalidSpec, "grid bounds must be increasing");
    }
    if (spec.n_theta < 8 || spec.n_omega < 8) {
        throw DatasetError(DatasetError::Kind::InvalidSpec, "grid needs at least 8x8 bins");
    }
    if (!(spec.smoothing_sigma >= 0.0) || !std::isfinite(spec.smoothing_sigma)) {
        throw DatasetError(DatasetError::Kind::InvalidSpec, "smoothing sigma must be >= 0");
    }
}

SafetyDataset::SafetyDataset(GridSpec spec, std::vector<double> p, DatasetMeta meta)
    : spec_(spec), p_(std::move(p)), meta_(std::move(meta)) {
    validate(spec_);
    const auto want = static_cast<std::size_t>(spec_.n_theta) * spec_.n_omega;
    if (p_.size() != want) {
        throw DatasetError(DatasetError::Kind::InvalidSpec, "probability grid size mismatch");
    }
    double sum = 0.0;
    for (double v : p_) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw DatasetError(DatasetError::Kind::InvalidSpec, "probabilities must be finite and >= 0");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw DatasetError(DatasetError::Kind::InvalidSpec,
                           "probabilities must sum to 1, got " + std::to_string(sum));
    }
}

double SafetyDataset::theta_width() const {
    return (spec_.theta_max - spec_.theta_min) / spec_.n_theta;
}

double SafetyDataset::omega_width() const {
    return (spec_.omega_max - spec_.omega_min) / spec_.n_omega;
}

double SafetyDataset::theta_center(int it) const {
    return spec_.theta_min + (it + 0.5) * theta_width();
}

double SafetyDataset::omega_center(int iw) const {
    return spec_.omega_min + (iw + 0.5) * omega_width();
}

std::vector<double> histogram_states(const std::vector<GravityAngleState>& states,
                                     const GridSpec& spec, std::uint64_t* clamped) {
    validate(spec);
    std::vector<double> grid(static_cast<std::size_t>(spec.n_theta) * spec.n_omega, 0.0);
    const double wt = (spec.theta_max - spec.theta_min) / spec.n_theta;
    const double ww = (spec.omega_max - spec.omega_min) / spec.n_omega;
    std::uint64_t out_of_range = 0;
    for (const auto& st : states) {
        const bool inside = st.theta_g >= spec.theta_min && st.theta_g <= spec.theta_max &&
                            st.omega >= spec.omega_min && st.omega <= spec.omega_max;
        if (!inside) ++out_of_range;
        int it = static_cast<int>(std::floor((st.theta_g - spec.theta_min) / wt));
        int iw = static_cast<int>(std::floor((st.omega - spec.omega_min) / ww));
        it = std::clamp(it, 0, spec.n_theta - 1);
        iw = std::clamp(iw, 0, spec.n_omega - 1);
        grid[static_cast<std::size_t>(it) * spec.n_omega + iw] += 1.0;
    }
    if (clamped) *clamped = out_of_range;
    return grid;
}

namespace {

int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;          // reflect about the outer bin edge
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

}  // namespace

std::vector<double> smooth_reflect(const std::vector<double>& grid, const GridSpec& spec) {
    validate(spec);
    const double sigma = spec.smoothing_sigma;
    if (sigma == 0.0) return grid;

    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        ksum += kernel[i + radius];
    }
    for (double& v : kernel) v /= ksum;

    const int nt = spec.n_theta, nw = spec.n_omega;
    std::vector<double> pass1(grid.size(), 0.0), pass2(grid.size(), 0.0);
    // along theta
    for (int iw = 0; iw < nw; ++iw) {
        for (int it = 0; it < nt; ++it) {
            double acc = 0.0;
            for (int j = -radius; j <= radius; ++j) {
                const int src = reflect_index(it + j, nt);
                acc += kernel[j + radius] * grid[static_cast<std::size_t>(src) * nw + iw];
            }
            pass1[static_cast<std::size_t>(it) * nw + iw] = acc;
        }
    }
    // along omega
    for (int it = 0; it < nt; ++it) {
        for (int iw = 0; iw < nw; ++iw) {
            double acc = 0.0;
            for (int j = -radius; j <= radius; ++j) {
                const int src = reflect_index(iw + j, nw);
                acc += kernel[j + radius] * pass1[static_cast<std::size_t>(it) * nw + src];
            }
            pass2[static_cast<std::size_t>(it) * nw + iw] = acc;
        }
    }
    return pass2;
}

SafetyDataset build_distribution(const std::vector<MotionTrace>& traces, const GridSpec& spec) {
    validate(spec);
    std::vector<GravityAngleState> states;
    DatasetMeta meta;
    for (const auto& trace : traces) {
        for (const auto& smp : trace.samples) states.push_back(gravity_angle(smp));
        meta.source_labels.push_back(
            trace.label ? std::string(to_string(trace.label->task)) + "," +
                              to_string(trace.label->intensity)
                        : std::string("unlabeled"));
    }
    if (states.empty()) {
        throw DatasetError(DatasetError::Kind::EmptyInput, "no samples to build from");
    }

    std::uint64_t clamped = 0;
    auto grid = histogram_states(states, spec, &clamped);
    meta.total_samples = states.size();
    meta.clamped_samples = clamped;
    if (clamped * 2 > states.size()) {
        throw DatasetError(DatasetError::Kind::AllOutOfRange,
                           "more than half the samples fall outside the grid (" +
                               std::to_string(clamped) + " of " + std::to_string(states.size()) +
                               ")");
    }

    grid = smooth_reflect(grid, spec);
    const double sum = std::accumulate(grid.begin(), grid.end(), 0.0);
    for (double& v : grid) v /= sum;
    return SafetyDataset(spec, std::move(grid), std::move(meta));
}

double query_probability(const SafetyDataset& ds, const GravityAngleState& state) {
    const GridSpec& g = ds.spec();
    if (state.theta_g < g.theta_min || state.theta_g > g.theta_max ||
        state.omega < g.omega_min || state.omega > g.omega_max) {
        return 0.0;
    }
    // continuous bin coordinates, clamped so edge queries read the edge bins
    double ut = (state.theta_g - g.theta_min) / ds.theta_width() - 0.5;
    double uw = (state.omega - g.omega_min) / ds.omega_width() - 0.5;
    ut = std::clamp(ut, 0.0, static_cast<double>(g.n_theta - 1));
    uw = std::clamp(uw, 0.0, static_cast<double>(g.n_omega - 1));
    const int it = std::min(static_cast<int>(ut), g.n_theta - 2);
    const int iw = std::min(static_cast<int>(uw), g.n_omega - 2);
    const double ft = ut - it;
    const double fw = uw - iw;
    const double v00 = ds.at(it, iw), v01 = ds.at(it, iw + 1);
    const double v10 = ds.at(it + 1, iw), v11 = ds.at(it + 1, iw + 1);
    return v00 * (1 - ft) * (1 - fw) + v10 * ft * (1 - fw) + v01 * (1 - ft) * fw +
           v11 * ft * fw;
}

std::optional<GravityAngleState> safest_neighbor(const SafetyDataset& ds,
                                                 const GravityAngleState& state,
                                                 double radius_theta, double radius_omega) {
    if (!(radius_theta > 0.0) || !(radius_omega > 0.0)) {
        throw DatasetError(DatasetError::Kind::InvalidSpec, "search radii must be positive");
    }
    const GridSpec& g = ds.spec();
    const double wt = ds.theta_width();
    const double ww = ds.omega_width();
    // bin ranges whose centers can possibly fall inside the ellipse
    int it_lo = static_cast<int>(std::floor((state.theta_g - radius_theta - g.theta_min) / wt - 0.5));
    int it_hi = static_cast<int>(std::ceil((state.theta_g + radius_theta - g.theta_min) / wt - 0.5));
    int iw_lo = static_cast<int>(std::floor((state.omega - radius_omega - g.omega_min) / ww - 0.5));
    int iw_hi = static_cast<int>(std::ceil((state.omega + radius_omega - g.omega_min) / ww - 0.5));
    it_lo = std::max(it_lo, 0);
    iw_lo = std::max(iw_lo, 0);
    it_hi = std::min(it_hi, g.n_theta - 1);
    iw_hi = std::min(iw_hi, g.n_omega - 1);

    bool found = false;
    double best_p = 0.0, best_d2 = 0.0;
    GravityAngleState best{};
    for (int it = it_lo; it <= it_hi; ++it) {
        for (int iw = iw_lo; iw <= iw_hi; ++iw) {
            const double ct = ds.theta_center(it);
            const double cw = ds.omega_center(iw);
            const double dt = (ct - state.theta_g) / radius_theta;
            const double dw = (cw - state.omega) / radius_omega;
            const double d2 = dt * dt + dw * dw;
            if (d2 > 1.0) continue;
            const double p = ds.at(it, iw);
            // scan order is ascending theta then omega, so strict comparisons
            // leave the smaller-coordinate bin in place on full ties
            if (!found || p > best_p || (p == best_p && d2 < best_d2)) {
                found = true;
                best_p = p;
                best_d2 = d2;
                best = GravityAngleState{ct, cw};
            }
        }
    }
    if (!found || best_p <= 0.0) return std::nullopt;
    return best;
}

namespace {

constexpr char kMagic[5] = {'P', 'S', 'M', 'D', 'S'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
    put(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size()) {
            throw DatasetError(DatasetError::Kind::CorruptDataset, "dataset image truncated");
        }
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string get_string() {
        const auto len = get<std::uint32_t>();
        if (pos_ + len > bytes_.size()) {
            throw DatasetError(DatasetError::Kind::CorruptDataset, "dataset image truncated");
        }
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return s;
    }

    std::size_t pos() const { return pos_; }
    std::size_t size() const { return bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> save_dataset(const SafetyDataset& ds) {
    // little-endian image: magic, version, grid spec, meta, then raw bins
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
    put(out, kVersion);
    const GridSpec& g = ds.spec();
    put(out, g.theta_min);
    put(out, g.theta_max);
    put(out, g.omega_min);
    put(out, g.omega_max);
    put(out, g.smoothing_sigma);
    put(out, static_cast<std::uint32_t>(g.n_theta));
    put(out, static_cast<std::uint32_t>(g.n_omega));
    const DatasetMeta& m = ds.meta();
    put(out, m.total_samples);
    put(out, m.clamped_samples);
    put(out, static_cast<std::uint32_t>(m.source_labels.size()));
    for (const auto& s : m.source_labels) put_string(out, s);
    put_string(out, m.built_at);
    for (double v : ds.p()) put(out, v);
    return out;
}

SafetyDataset load_dataset(std::span<const std::uint8_t> bytes) {
    Reader rd(bytes);
    char magic[sizeof(kMagic)];
    for (char& c : magic) c = static_cast<char>(rd.get<std::uint8_t>());
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DatasetError(DatasetError::Kind::CorruptDataset, "bad magic");
    }
    const auto version = rd.get<std::uint8_t>();
    if (version != kVersion) {
        throw DatasetError(DatasetError::Kind::VersionMismatch,
                           "dataset version " + std::to_string(version) + ", expected " +
                               std::to_string(kVersion));
    }
    GridSpec g;
    g.theta_min = rd.get<double>();
    g.theta_max = rd.get<double>();
    g.omega_min = rd.get<double>();
    g.omega_max = rd.get<double>();
    g.smoothing_sigma = rd.get<double>();
    g.n_theta = static_cast<int>(rd.get<std::uint32_t>());
    g.n_omega = static_cast<int>(rd.get<std::uint32_t>());
    DatasetMeta m;
    m.total_samples = rd.get<std::uint64_t>();
    m.clamped_samples = rd.get<std::uint64_t>();
    const auto n_labels = rd.get<std::uint32_t>();
    m.source_labels.reserve(n_labels);
    for (std::uint32_t i = 0; i < n_labels; ++i) m.source_labels.push_back(rd.get_string());
    m.built_at = rd.get_string();
    if (g.n_theta < 8 || g.n_omega < 8 || g.n_theta > (1 << 16) || g.n_omega > (1 << 16)) {
        throw DatasetError(DatasetError::Kind::CorruptDataset, "implausible grid dimensions");
    }
    const auto n_bins = static_cast<std::size_t>(g.n_theta) * g.n_omega;
    std::vector<double> p(n_bins);
    for (auto& v : p) v = rd.get<double>();
    if (rd.pos() != rd.size()) {
        throw DatasetError(DatasetError::Kind::CorruptDataset, "trailing bytes after payload");
    }
    try {
        return SafetyDataset(g, std::move(p), std::move(m));
    } catch (const DatasetError& e) {
        throw DatasetError(DatasetError::Kind::CorruptDataset,
                           std::string("stored dataset fails invariants: ") + e.what());
    }
}

void save_dataset_file(const SafetyDataset& ds, const std::string& path) {
    const auto bytes = save_dataset(ds);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DatasetError(DatasetError::Kind::InvalidSpec, "cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DatasetError(DatasetError::Kind::InvalidSpec, "short write to " + path);
}

SafetyDataset load_dataset_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DatasetError(DatasetError::Kind::CorruptDataset, "cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return load_dataset(bytes);
}

}  // namespace psm

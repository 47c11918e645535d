#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetnet {

struct StructuralError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class T>
class Array2 {
public:
    Array2() = default;
    Array2(int d0, int d1, T fill = T{}) : d0_(d0), d1_(d1), v_(static_cast<size_t>(d0) * d1, fill) {}

    T& operator()(int i, int j) { return v_[static_cast<size_t>(i) * d1_ + j]; }
    const T& operator()(int i, int j) const { return v_[static_cast<size_t>(i) * d1_ + j]; }
    int dim0() const { return d0_; }
    int dim1() const { return d1_; }
    std::vector<T>& raw() { return v_; }
    const std::vector<T>& raw() const { return v_; }
    bool operator==(const Array2&) const = default;

private:
    int d0_ = 0, d1_ = 0;
    std::vector<T> v_;
};

template <class T>
class Array3 {
public:
    Array3() = default;
    Array3(int d0, int d1, int d2, T fill = T{})
        : d0_(d0), d1_(d1), d2_(d2), v_(static_cast<size_t>(d0) * d1 * d2, fill) {}

    T& operator()(int i, int j, int k) { return v_[(static_cast<size_t>(i) * d1_ + j) * d2_ + k]; }
    const T& operator()(int i, int j, int k) const { return v_[(static_cast<size_t>(i) * d1_ + j) * d2_ + k]; }
    int dim0() const { return d0_; }
    int dim1() const { return d1_; }
    int dim2() const { return d2_; }
    std::vector<T>& raw() { return v_; }
    const std::vector<T>& raw() const { return v_; }
    bool operator==(const Array3&) const = default;

private:
    int d0_ = 0, d1_ = 0, d2_ = 0;
    std::vector<T> v_;
};

enum class BsKind { Macro, Small };

// Powers in mW, storage in bits, positions in meters.
struct BaseStation {
    int id = 0;
    BsKind kind = BsKind::Small;
    double x = 0, y = 0;
    double radius = 20;
    double cache_bits = 0;
    double p_max = 0;
    double p_mask = 0;
    int l_max = 1;
    double p_hardware = 0;
    double p_sleep = 0;
    double p_bbu = 0;
};

struct User {
    int id = 0;
    double x = 0, y = 0;
};

struct CostConstants {
    double c_power = 5;  // per mW
    double c_bw = 3;     // per kHz
    double c_fh = 7;     // per bit/s
    double c_bh = 20;    // per bit/s
};

enum class LinkRateBound { Min, Max };

struct Scenario {
    std::vector<BaseStation> bss;  // index 0 is the MBS
    std::vector<User> users;
    int n_sub = 1;
    double total_bw = 0;   // Hz
    double sub_bw = 0;     // Hz
    double noise_dbm_hz = -174;
    double kappa = 3;
    double slot_T = 300e-6;
    Array2<double> fh_cap;  // [i][b], bits/s
    CostConstants cost;
    std::uint64_t seed = 1;
    int mc_samples = 50;
    LinkRateBound link_bound = LinkRateBound::Min;

    int B() const { return static_cast<int>(bss.size()); }
    int U() const { return static_cast<int>(users.size()); }
    int N() const { return n_sub; }
    double noise_mw() const;
    double distance(int b, int u) const;
    void validate() const;
};

struct ContentCatalog {
    std::vector<double> sizes;       // bits
    std::vector<double> popularity;  // sums to 1, non-increasing
    double alpha = 0;
    int C() const { return static_cast<int>(sizes.size()); }
    double total_size() const;
    double mean_size() const;
};

// One requested content per user; -1 when the user is idle or not admitted.
struct RequestMatrix {
    std::vector<int> content;
    bool delta(int u, int c) const { return content[u] == c; }
};

struct AllocationState {
    Array3<std::uint8_t> tau;  // [b][u][n]
    Array2<std::uint8_t> rho;  // [b][c]
    Array2<std::uint8_t> x;    // [b][c]
    Array3<std::uint8_t> y;    // [i][b][c]
    Array2<std::uint8_t> z;    // [b][c]
    Array3<double> p;          // [b][u][n]
    Array3<double> r_fh;       // [i][b][c]
    Array2<double> r_bh;       // [b][c]

    AllocationState() = default;
    AllocationState(int B, int U, int N, int C);
};

struct CostBreakdown {
    double power_cost = 0;
    double radio_bw_cost = 0;
    double link_bw_cost = 0;
    double total = 0;
    double acceptance_ratio = 1;
};

std::vector<double> zipf_popularity(int C, double alpha);

// Log-normal draws with log-mean mu and log-variance sigma2, rescaled so the
// sample mean equals mean_bits.
std::vector<double> lognormal_sizes(int C, double mu, double sigma2, double mean_bits, std::uint64_t seed);

CostBreakdown total_cost(const AllocationState& s, const Scenario& sc, const ContentCatalog& cat);

// Per-BS terms, used by solvers that only touch part of the state.
double bs_power_cost(const AllocationState& s, const Scenario& sc, int b);
double link_cost(const AllocationState& s, const Scenario& sc);

}  // namespace hetnet

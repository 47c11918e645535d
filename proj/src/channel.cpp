#include "hetnet/channel.hpp"

#include <cmath>

namespace hetnet {

ChannelState sample_channel(const Scenario& sc, Rng& rng) {
    ChannelState ch{Array3<double>(sc.B(), sc.U(), sc.N())};
    for (int b = 0; b < sc.B(); ++b)
        for (int u = 0; u < sc.U(); ++u) {
            double pl = std::pow(sc.distance(b, u), -sc.kappa);
            for (int n = 0; n < sc.N(); ++n) ch.h(b, u, n) = exponential1(rng) * pl;
        }
    return ch;
}

ChannelState mean_channel(const Scenario& sc) {
    ChannelState ch{Array3<double>(sc.B(), sc.U(), sc.N())};
    for (int b = 0; b < sc.B(); ++b)
        for (int u = 0; u < sc.U(); ++u) {
            double pl = std::pow(sc.distance(b, u), -sc.kappa);
            for (int n = 0; n < sc.N(); ++n) ch.h(b, u, n) = pl;
        }
    return ch;
}

std::vector<ChannelState> sample_channels(const Scenario& sc, int S, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ChannelState> out;
    out.reserve(S);
    for (int s = 0; s < S; ++s) out.push_back(sample_channel(sc, rng));
    return out;
}

double intra_interference(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p, int b,
                          int u, int n) {
    double hu = ch.h(b, u, n);
    double s = 0;
    for (int i = 0; i < tau.dim1(); ++i)
        if (i != u && tau(b, i, n) && ch.h(b, i, n) >= hu) s += p(b, i, n) * hu;
    return s;
}

double inter_interference(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p, int b,
                          int u, int n) {
    double s = 0;
    for (int j = 0; j < tau.dim0(); ++j) {
        if (j == b) continue;
        double hju = ch.h(j, u, n);
        for (int d = 0; d < tau.dim1(); ++d)
            if (tau(j, d, n)) s += p(j, d, n) * hju;
    }
    return s;
}

double sinr(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p, int b, int u, int n,
            const Scenario& sc) {
    double denom = intra_interference(ch, tau, p, b, u, n) + inter_interference(ch, tau, p, b, u, n) + sc.noise_mw();
    return p(b, u, n) * ch.h(b, u, n) / denom;
}

double rate(int tau, double gamma, double W) {
    if (!tau) return 0.0;
    return W * std::log2(1.0 + gamma);
}

Array3<double> all_rates(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p,
                         const Scenario& sc) {
    Array3<double> r(sc.B(), sc.U(), sc.N(), 0.0);
    for (int b = 0; b < sc.B(); ++b)
        for (int u = 0; u < sc.U(); ++u)
            for (int n = 0; n < sc.N(); ++n)
                if (tau(b, u, n)) r(b, u, n) = rate(1, sinr(ch, tau, p, b, u, n, sc), sc.sub_bw);
    return r;
}

std::vector<double> access_rates(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p,
                                 const Scenario& sc) {
    std::vector<double> out(sc.U(), 0.0);
    for (int b = 0; b < sc.B(); ++b)
        for (int u = 0; u < sc.U(); ++u)
            for (int n = 0; n < sc.N(); ++n)
                if (tau(b, u, n)) out[u] += rate(1, sinr(ch, tau, p, b, u, n, sc), sc.sub_bw);
    return out;
}

SicReport sic_feasible(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p,
                       const Scenario& sc) {
    SicReport rep;
    double s2 = sc.noise_mw();
    for (int b = 0; b < sc.B(); ++b)
        for (int n = 0; n < sc.N(); ++n)
            for (int u = 0; u < sc.U(); ++u) {
                if (!tau(b, u, n)) continue;
                for (int w = 0; w < sc.U(); ++w) {
                    if (w == u || !tau(b, w, n)) continue;
                    double hu = ch.h(b, u, n), hw = ch.h(b, w, n);
                    if (hu < hw) continue;
                    double iu = intra_interference(ch, tau, p, b, u, n) + inter_interference(ch, tau, p, b, u, n);
                    double iw = intra_interference(ch, tau, p, b, w, n) + inter_interference(ch, tau, p, b, w, n);
                    double lhs = hu * (iw + s2);
                    double rhs = hw * (iu + s2);
                    if (lhs < rhs - 1e-12 * std::max(std::abs(lhs), std::abs(rhs))) {
                        rep.ok = false;
                        rep.violations.push_back({b, n, u, w});
                    }
                }
            }
    return rep;
}

Array2<double> ergodic_rate(const std::vector<ChannelState>& samples, const Array3<std::uint8_t>& tau,
                            const Array3<double>& p, const Scenario& sc) {
    Array2<double> out(sc.B(), sc.U(), 0.0);
    if (samples.empty()) return out;
    for (const auto& ch : samples) {
        auto r = all_rates(ch, tau, p, sc);
        for (int b = 0; b < sc.B(); ++b)
            for (int u = 0; u < sc.U(); ++u)
                for (int n = 0; n < sc.N(); ++n) out(b, u) += r(b, u, n);
    }
    for (auto& v : out.raw()) v /= static_cast<double>(samples.size());
    return out;
}

Array2<double> ergodic_rate(const Scenario& sc, const Array3<std::uint8_t>& tau, const Array3<double>& p, int S,
                            Rng& rng) {
    if (S < 1) throw StructuralError("ergodic_rate needs S >= 1");
    std::vector<ChannelState> samples;
    samples.reserve(S);
    for (int s = 0; s < S; ++s) samples.push_back(sample_channel(sc, rng));
    return ergodic_rate(samples, tau, p, sc);
}

}  // namespace hetnet

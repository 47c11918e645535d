#include "hetnet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <mutex>
#include <thread>

#include "hetnet/audit.hpp"
#include "hetnet/rng.hpp"

namespace hetnet {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing

namespace {

class Section {
public:
    Section(const json& root, const std::string& name) : path_(name) {
        if (!root.contains(name)) return;
        node_ = &root.at(name);
        if (!node_->is_object()) throw ConfigError(name, "must be an object");
    }

    void num(const char* key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(field(key), "must be a number");
            out = v->get<double>();
            if (!std::isfinite(out)) throw ConfigError(field(key), "must be finite");
        }
    }
    void integer(const char* key, int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(field(key), "must be an integer");
            out = v->get<int>();
        }
    }
    void boolean(const char* key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(field(key), "must be true or false");
            out = v->get<bool>();
        }
    }
    void u64(const char* key, std::uint64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
                throw ConfigError(field(key), "must be a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void str(const char* key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(field(key), "must be a string");
            out = v->get<std::string>();
        }
    }
    void strings(const char* key, std::vector<std::string>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) throw ConfigError(field(key), "must be an array of strings");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_string()) throw ConfigError(field(key), "must be an array of strings");
                out.push_back(e.get<std::string>());
            }
        }
    }
    void numbers(const char* key, std::vector<double>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) throw ConfigError(field(key), "must be an array of numbers");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number()) throw ConfigError(field(key), "must be an array of numbers");
                out.push_back(e.get<double>());
            }
        }
    }
    const json* object(const char* key) {
        const json* v = find(key);
        if (v && !v->is_object()) throw ConfigError(field(key), "must be an object");
        return v;
    }
    void finish() const {
        if (!node_) return;
        for (auto it = node_->begin(); it != node_->end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(field(it.key().c_str()), "unknown field");
    }
    std::string field(const char* key) const { return path_ + "." + key; }

private:
    const json* find(const char* key) {
        seen_.insert(key);
        if (!node_ || !node_->contains(key)) return nullptr;
        return &node_->at(key);
    }
    std::string path_;
    const json* node_ = nullptr;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field, what);
}

const std::set<std::string> kSweepParams = {"users", "sbs_count", "sbs_cache_pct", "zipf_alpha"};

void check_ranges(const HarnessConfig& c) {
    require(c.mbs_radius > 0, "geometry.mbs_radius_m", "must be > 0");
    require(c.sbs_radius > 0 && c.sbs_radius <= c.mbs_radius, "geometry.sbs_radius_m", "must be in (0, mbs_radius_m]");
    require(c.sbs_count >= 0, "geometry.sbs_count", "must be >= 0");
    require(c.users >= 1, "geometry.users", "must be >= 1");
    require(c.subcarriers >= 1, "radio.subcarriers", "must be >= 1");
    require(c.total_bw > 0, "radio.total_bandwidth_hz", "must be > 0");
    require(c.kappa >= 0, "radio.path_loss_exponent", "must be >= 0");
    require(c.slot_T > 0, "radio.slot_duration_s", "must be > 0");
    require(c.l_max >= 1, "radio.l_max", "must be >= 1");
    require(c.contents >= 1, "catalog.contents", "must be >= 1");
    require(c.zipf_alpha >= 0 && c.zipf_alpha <= 1, "catalog.zipf_alpha", "must be in [0, 1]");
    require(c.size_sigma2 >= 0, "catalog.size_sigma2", "must be >= 0");
    require(c.mean_size_bits > 0, "catalog.mean_size_bits", "must be > 0");
    require(c.mbs_cache_pct >= 0 && c.mbs_cache_pct <= 100, "cache.mbs_pct", "must be in [0, 100]");
    require(c.sbs_cache_pct >= 0 && c.sbs_cache_pct <= 100, "cache.sbs_pct", "must be in [0, 100]");
    require(c.mbs_p_max >= 0, "power.mbs_p_max_mw", "must be >= 0");
    require(c.sbs_p_max >= 0, "power.sbs_p_max_mw", "must be >= 0");
    require(c.mbs_p_mask >= 0 && c.mbs_p_mask <= c.mbs_p_max, "power.mbs_p_mask_mw", "must be in [0, mbs_p_max_mw]");
    require(c.sbs_p_mask >= 0 && c.sbs_p_mask <= c.sbs_p_max, "power.sbs_p_mask_mw", "must be in [0, sbs_p_max_mw]");
    require(c.mbs_p_hardware >= 0, "power.mbs_p_hardware_mw", "must be >= 0");
    require(c.sbs_p_hardware >= 0, "power.sbs_p_hardware_mw", "must be >= 0");
    require(c.p_sleep >= 0, "power.p_sleep_mw", "must be >= 0");
    require(c.p_bbu >= 0, "power.p_bbu_mw", "must be >= 0");
    require(c.cost.c_power >= 0, "cost.c_power", "must be >= 0");
    require(c.cost.c_bw >= 0, "cost.c_bw", "must be >= 0");
    require(c.cost.c_fh >= 0, "cost.c_fh", "must be >= 0");
    require(c.cost.c_bh > c.cost.c_fh, "cost.c_bh", "must exceed cost.c_fh");
    require(c.fh_capacity >= 0, "links.fronthaul_capacity_bps", "must be >= 0");
    require(c.mc_samples >= 1, "solver.mc_samples", "must be >= 1");
    require(c.orch.caching_asm.tolerance > 0 && c.orch.caching_asm.tolerance < 1, "solver.caching_tolerance",
            "must be in (0, 1)");
    require(c.orch.caching_asm.max_iters >= 1, "solver.caching_max_iters", "must be >= 1");
    require(c.orch.delivery_asm.tolerance > 0 && c.orch.delivery_asm.tolerance < 1, "solver.delivery_tolerance",
            "must be in (0, 1)");
    require(c.orch.delivery_asm.max_iters >= 1, "solver.delivery_max_iters", "must be >= 1");
    require(c.orch.sca.epsilon > 0, "solver.sca_epsilon", "must be > 0");
    require(c.orch.sca.k_max >= 1, "solver.sca_max_iters", "must be >= 1");
    require(c.orch.diversity_factor >= 0 && c.orch.diversity_factor <= 1, "solver.diversity_factor",
            "must be in [0, 1]");
    require(c.slots >= 1, "experiment.slots", "must be >= 1");
    require(c.sweep.runs >= 1, "experiment.runs", "must be >= 1");
    require(!c.sweep.policies.empty(), "experiment.policies", "must not be empty");
    for (const auto& p : c.sweep.policies) {
        try {
            parse_policy(p);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("experiment.policies", e.what());
        }
    }
    if (!c.sweep.parameter.empty()) {
        require(kSweepParams.count(c.sweep.parameter) > 0, "experiment.sweep.parameter",
                "must be one of users, sbs_count, sbs_cache_pct, zipf_alpha");
        require(!c.sweep.values.empty(), "experiment.sweep.values", "must not be empty");
        for (double v : c.sweep.values) {
            try {
                HarnessConfig probe = with_parameter(c, c.sweep.parameter, v);
                probe.sweep.parameter.clear();
                check_ranges(probe);
            } catch (const ConfigError& e) {
                throw ConfigError("experiment.sweep.values", "value " + std::to_string(v) + " gives " + e.what());
            }
        }
    }
}

}  // namespace

HarnessConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    static const std::set<std::string> sections = {"geometry", "radio", "catalog", "cache", "power",
                                                   "cost",     "links", "solver",  "experiment"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!sections.count(it.key())) throw ConfigError(it.key(), "unknown section");

    HarnessConfig c;
    c.sweep.policies = {"Ergodic/CO-NOMA"};

    Section g(j, "geometry");
    g.num("mbs_radius_m", c.mbs_radius);
    g.num("sbs_radius_m", c.sbs_radius);
    g.integer("sbs_count", c.sbs_count);
    g.integer("users", c.users);
    g.finish();

    Section r(j, "radio");
    r.integer("subcarriers", c.subcarriers);
    r.num("total_bandwidth_hz", c.total_bw);
    r.num("noise_dbm_per_hz", c.noise_dbm_hz);
    r.num("path_loss_exponent", c.kappa);
    r.num("slot_duration_s", c.slot_T);
    r.integer("l_max", c.l_max);
    r.finish();

    Section cat(j, "catalog");
    cat.integer("contents", c.contents);
    cat.num("zipf_alpha", c.zipf_alpha);
    cat.num("size_mu", c.size_mu);
    cat.num("size_sigma2", c.size_sigma2);
    cat.num("mean_size_bits", c.mean_size_bits);
    cat.finish();

    Section ca(j, "cache");
    ca.num("mbs_pct", c.mbs_cache_pct);
    ca.num("sbs_pct", c.sbs_cache_pct);
    ca.finish();

    Section p(j, "power");
    p.num("mbs_p_max_mw", c.mbs_p_max);
    p.num("sbs_p_max_mw", c.sbs_p_max);
    p.num("mbs_p_mask_mw", c.mbs_p_mask);
    p.num("sbs_p_mask_mw", c.sbs_p_mask);
    p.num("mbs_p_hardware_mw", c.mbs_p_hardware);
    p.num("sbs_p_hardware_mw", c.sbs_p_hardware);
    p.num("p_sleep_mw", c.p_sleep);
    p.num("p_bbu_mw", c.p_bbu);
    p.finish();

    Section co(j, "cost");
    co.num("c_power", c.cost.c_power);
    co.num("c_bw", c.cost.c_bw);
    co.num("c_fh", c.cost.c_fh);
    co.num("c_bh", c.cost.c_bh);
    co.finish();

    Section l(j, "links");
    l.num("fronthaul_capacity_bps", c.fh_capacity);
    std::string bound = "min";
    l.str("link_rate_bound", bound);
    if (bound == "min") c.link_bound = LinkRateBound::Min;
    else if (bound == "max") c.link_bound = LinkRateBound::Max;
    else throw ConfigError("links.link_rate_bound", "must be \"min\" or \"max\"");
    l.finish();

    Section s(j, "solver");
    s.integer("mc_samples", c.mc_samples);
    s.num("caching_tolerance", c.orch.caching_asm.tolerance);
    s.integer("caching_max_iters", c.orch.caching_asm.max_iters);
    s.num("delivery_tolerance", c.orch.delivery_asm.tolerance);
    s.integer("delivery_max_iters", c.orch.delivery_asm.max_iters);
    s.num("sca_epsilon", c.orch.sca.epsilon);
    s.integer("sca_max_iters", c.orch.sca.k_max);
    s.num("diversity_factor", c.orch.diversity_factor);
    s.boolean("reassociation", c.orch.reassociation);
    s.finish();

    Section e(j, "experiment");
    e.u64("seed", c.sweep.seed);
    e.integer("runs", c.sweep.runs);
    e.integer("slots", c.slots);
    e.strings("policies", c.sweep.policies);
    if (const json* sw = e.object("sweep")) {
        json wrap = {{"sweep", *sw}};
        Section ss(wrap, "sweep");
        ss.str("parameter", c.sweep.parameter);
        ss.numbers("values", c.sweep.values);
        try {
            ss.finish();
        } catch (const ConfigError& err) {
            throw ConfigError("experiment." + err.field, "unknown field");
        }
        if (c.sweep.parameter.empty()) throw ConfigError("experiment.sweep.parameter", "is required");
    }
    e.finish();

    check_ranges(c);
    return c;
}

HarnessConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& err) {
        throw ConfigError("<file>", std::string("invalid JSON: ") + err.what());
    }
    return parse_config(j);
}

json config_to_json(const HarnessConfig& c) {
    json j;
    j["geometry"] = {{"mbs_radius_m", c.mbs_radius},
                     {"sbs_radius_m", c.sbs_radius},
                     {"sbs_count", c.sbs_count},
                     {"users", c.users}};
    j["radio"] = {{"subcarriers", c.subcarriers},       {"total_bandwidth_hz", c.total_bw},
                  {"noise_dbm_per_hz", c.noise_dbm_hz}, {"path_loss_exponent", c.kappa},
                  {"slot_duration_s", c.slot_T},        {"l_max", c.l_max}};
    j["catalog"] = {{"contents", c.contents},       {"zipf_alpha", c.zipf_alpha},
                    {"size_mu", c.size_mu},         {"size_sigma2", c.size_sigma2},
                    {"mean_size_bits", c.mean_size_bits}};
    j["cache"] = {{"mbs_pct", c.mbs_cache_pct}, {"sbs_pct", c.sbs_cache_pct}};
    j["power"] = {{"mbs_p_max_mw", c.mbs_p_max},           {"sbs_p_max_mw", c.sbs_p_max},
                  {"mbs_p_mask_mw", c.mbs_p_mask},         {"sbs_p_mask_mw", c.sbs_p_mask},
                  {"mbs_p_hardware_mw", c.mbs_p_hardware}, {"sbs_p_hardware_mw", c.sbs_p_hardware},
                  {"p_sleep_mw", c.p_sleep},               {"p_bbu_mw", c.p_bbu}};
    j["cost"] = {{"c_power", c.cost.c_power}, {"c_bw", c.cost.c_bw}, {"c_fh", c.cost.c_fh}, {"c_bh", c.cost.c_bh}};
    j["links"] = {{"fronthaul_capacity_bps", c.fh_capacity},
                  {"link_rate_bound", c.link_bound == LinkRateBound::Min ? "min" : "max"}};
    j["solver"] = {{"mc_samples", c.mc_samples},
                   {"caching_tolerance", c.orch.caching_asm.tolerance},
                   {"caching_max_iters", c.orch.caching_asm.max_iters},
                   {"delivery_tolerance", c.orch.delivery_asm.tolerance},
                   {"delivery_max_iters", c.orch.delivery_asm.max_iters},
                   {"sca_epsilon", c.orch.sca.epsilon},
                   {"sca_max_iters", c.orch.sca.k_max},
                   {"diversity_factor", c.orch.diversity_factor},
                   {"reassociation", c.orch.reassociation}};
    j["experiment"] = {{"seed", c.sweep.seed}, {"runs", c.sweep.runs}, {"slots", c.slots},
                       {"policies", c.sweep.policies}};
    if (!c.sweep.parameter.empty())
        j["experiment"]["sweep"] = {{"parameter", c.sweep.parameter}, {"values", c.sweep.values}};
    return j;
}

HarnessConfig with_parameter(HarnessConfig cfg, const std::string& parameter, double value) {
    if (parameter.empty()) return cfg;
    if (parameter == "users") cfg.users = static_cast<int>(std::lround(value));
    else if (parameter == "sbs_count") cfg.sbs_count = static_cast<int>(std::lround(value));
    else if (parameter == "sbs_cache_pct") cfg.sbs_cache_pct = value;
    else if (parameter == "zipf_alpha") cfg.zipf_alpha = value;
    else throw ConfigError("experiment.sweep.parameter", "unknown parameter '" + parameter + "'");
    return cfg;
}

// ---------------------------------------------------------------------------
// Instances

std::uint64_t stream_seed(std::uint64_t rs, Stream s, std::uint64_t sub) {
    return derive_seed(rs, {static_cast<std::uint64_t>(s), sub});
}

std::uint64_t run_seed(std::uint64_t seed, int run) { return derive_seed(seed, {0x52554eULL, static_cast<std::uint64_t>(run)}); }

namespace {

void point_in_disc(Rng& rng, double cx, double cy, double radius, double& x, double& y) {
    double r = radius * std::sqrt(uniform01(rng));
    double a = 6.283185307179586 * uniform01(rng);
    x = cx + r * std::cos(a);
    y = cy + r * std::sin(a);
}

}  // namespace

Instance build_instance(const HarnessConfig& c, std::uint64_t rs) {
    Instance in;
    ContentCatalog& cat = in.cat;
    cat.alpha = c.zipf_alpha;
    cat.popularity = zipf_popularity(c.contents, c.zipf_alpha);
    cat.sizes = lognormal_sizes(c.contents, c.size_mu, c.size_sigma2, c.mean_size_bits, stream_seed(rs, Stream::Catalog));
    const double total = cat.total_size();

    Scenario& sc = in.sc;
    Rng geo(stream_seed(rs, Stream::Geometry));
    BaseStation mbs;
    mbs.id = 0;
    mbs.kind = BsKind::Macro;
    mbs.radius = c.mbs_radius;
    mbs.cache_bits = c.mbs_cache_pct / 100.0 * total;
    mbs.p_max = c.mbs_p_max;
    mbs.p_mask = c.mbs_p_mask;
    mbs.l_max = c.l_max;
    mbs.p_hardware = c.mbs_p_hardware;
    mbs.p_sleep = c.p_sleep;
    mbs.p_bbu = c.p_bbu;
    sc.bss.push_back(mbs);
    for (int k = 1; k <= c.sbs_count; ++k) {
        BaseStation s = mbs;
        s.id = k;
        s.kind = BsKind::Small;
        s.radius = c.sbs_radius;
        s.cache_bits = c.sbs_cache_pct / 100.0 * total;
        s.p_max = c.sbs_p_max;
        s.p_mask = c.sbs_p_mask;
        s.p_hardware = c.sbs_p_hardware;
        point_in_disc(geo, 0, 0, c.mbs_radius - c.sbs_radius, s.x, s.y);
        sc.bss.push_back(s);
    }
    // Each user picks a cell uniformly, then a uniform point in that cell.
    for (int u = 0; u < c.users; ++u) {
        const auto& home = sc.bss[uniform_int(geo, static_cast<int>(sc.bss.size()))];
        User usr;
        usr.id = u;
        point_in_disc(geo, home.x, home.y, home.radius, usr.x, usr.y);
        sc.users.push_back(usr);
    }
    sc.n_sub = c.subcarriers;
    sc.total_bw = c.total_bw;
    sc.sub_bw = c.total_bw / c.subcarriers;
    sc.noise_dbm_hz = c.noise_dbm_hz;
    sc.kappa = c.kappa;
    sc.slot_T = c.slot_T;
    const int B = sc.B();
    sc.fh_cap = Array2<double>(B, B, 0.0);
    for (int i = 0; i < B; ++i)
        for (int b = 0; b < B; ++b)
            if (i != b) sc.fh_cap(i, b) = c.fh_capacity;
    sc.cost = c.cost;
    sc.seed = rs;
    sc.mc_samples = c.mc_samples;
    sc.link_bound = c.link_bound;
    sc.validate();
    return in;
}

// ---------------------------------------------------------------------------
// Runs

bool non_increasing(const std::vector<double>& t, double rel_tol) {
    for (size_t k = 1; k < t.size(); ++k)
        if (t[k] > t[k - 1] + rel_tol * std::max(1.0, std::abs(t[k - 1]))) return false;
    return true;
}

namespace {

int count_nonmonotone(const std::vector<double>& asm_trace, const std::vector<std::vector<ScaTraceRow>>& sca) {
    int bad = non_increasing(asm_trace) ? 0 : 1;
    for (const auto& tr : sca) {
        std::vector<double> obj;
        for (const auto& row : tr) obj.push_back(row.objective);
        bad += non_increasing(obj) ? 0 : 1;
    }
    return bad;
}

}  // namespace

std::vector<RunOutcome> run_policies(const HarnessConfig& cfg, std::uint64_t rs,
                                     const std::vector<PolicyConfig>& policies) {
    Instance in = build_instance(cfg, rs);
    const Scenario& sc = in.sc;
    OrchestratorConfig ocfg = cfg.orch;
    ocfg.channel_seed = stream_seed(rs, Stream::CachingChannel);
    std::vector<ChannelState> samples = sample_channels(sc, sc.mc_samples, ocfg.channel_seed);

    // Placement depends only on the caching policy and the access mode.
    struct CachedPhase {
        CachingPolicy caching;
        Access access;
        bool infeasible;
        CachingResult res;
        std::vector<std::string> audit;
    };
    std::vector<CachedPhase> phases;
    auto phase_for = [&](const PolicyConfig& pc) -> const CachedPhase& {
        for (const auto& ph : phases)
            if (ph.caching == pc.caching && ph.access == pc.access) return ph;
        CachedPhase ph{pc.caching, pc.access, false, {}, {}};
        try {
            ph.res = caching_for_policy(sc, in.cat, pc, stream_seed(rs, Stream::Policy), ocfg);
            Scenario eff = effective_scenario(sc, pc);
            ph.audit = audit_caching(eff, in.cat, samples, ph.res.rho, ph.res.tau, ph.res.p,
                                     pc.caching == CachingPolicy::Ergodic);
        } catch (const InfeasibleError&) {
            ph.infeasible = true;
        }
        phases.push_back(std::move(ph));
        return phases.back();
    };

    std::vector<RunOutcome> out;
    for (const auto& pc : policies) {
        RunOutcome ro;
        const CachedPhase& ph = phase_for(pc);
        if (ph.infeasible) {
            ro.infeasible = true;
            ro.cost.acceptance_ratio = 0;
            out.push_back(ro);
            continue;
        }
        ro.caching_iters = ph.res.iterations;
        ro.caching_trace = ph.res.trace;
        ro.nonmonotone_traces += count_nonmonotone(ph.res.trace, ph.res.sca_traces);
        ro.audit_violations += static_cast<int>(ph.audit.size());
        for (const auto& m : ph.audit) ro.audit_messages.push_back(pc.label() + " caching: " + m);

        Scenario eff = effective_scenario(sc, pc);
        CostBreakdown acc{0, 0, 0, 0, 0};
        for (int t = 0; t < cfg.slots; ++t) {
            Rng chr(stream_seed(rs, Stream::DeliveryChannel, t));
            ChannelState ch = sample_channel(sc, chr);
            RequestMatrix req = draw_requests(in.cat, ph.res.admitted, stream_seed(rs, Stream::Requests, t));
            DeliveryResult dr = run_delivery_slot(sc, in.cat, ph.res.rho, req, ch, pc, ocfg, stream_seed(rs, Stream::Ties, t));
            if (t == 0) ro.delivery_trace = dr.trace;
            ro.delivery_iters = std::max(ro.delivery_iters, dr.iterations);
            ro.nonmonotone_traces += count_nonmonotone(dr.trace, dr.sca_traces);
            AuditOptions ao;
            ao.cooperative = pc.cooperation == Cooperation::Cooperative;
            auto msgs = audit_delivery(eff, in.cat, ch, dr.state, req, dr.served, ao);
            ro.audit_violations += static_cast<int>(msgs.size());
            for (const auto& m : msgs) ro.audit_messages.push_back(pc.label() + " slot " + std::to_string(t) + ": " + m);
            acc.power_cost += dr.cost.power_cost;
            acc.radio_bw_cost += dr.cost.radio_bw_cost;
            acc.link_bw_cost += dr.cost.link_bw_cost;
            acc.total += dr.cost.total;
            acc.acceptance_ratio += dr.cost.acceptance_ratio;
        }
        const double k = cfg.slots;
        ro.cost = {acc.power_cost / k, acc.radio_bw_cost / k, acc.link_bw_cost / k, acc.total / k,
                   acc.acceptance_ratio / k};
        out.push_back(std::move(ro));
    }
    return out;
}

int resolve_threads(int threads) {
    if (threads > 0) return threads;
    if (const char* env = std::getenv("HETNET_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0;
    for (double x : v) mean += x;
    mean /= v.size();
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
}

}  // namespace

SweepResult run_sweep(const HarnessConfig& cfg, const SweepSpec& spec, int threads) {
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    std::vector<double> values = spec.values;
    if (spec.parameter.empty()) values = {0.0};
    std::vector<PolicyConfig> policies;
    for (const auto& p : spec.policies) policies.push_back(parse_policy(p));

    const int V = static_cast<int>(values.size()), R = spec.runs;
    std::vector<std::vector<RunOutcome>> results(static_cast<size_t>(V) * R);
    std::vector<double> task_time(results.size(), 0.0);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex fail_mu;
    SweepResult res;
    res.threads = std::min(resolve_threads(threads), static_cast<int>(results.size()));

    auto worker = [&] {
        while (true) {
            int task = next.fetch_add(1);
            if (task >= static_cast<int>(results.size())) return;
            int vi = task / R, run = task % R;
            try {
                auto ts = clock::now();
                HarnessConfig c = with_parameter(cfg, spec.parameter, values[vi]);
                results[task] = run_policies(c, run_seed(spec.seed, run), policies);
                task_time[task] = std::chrono::duration<double>(clock::now() - ts).count();
            } catch (...) {
                std::lock_guard<std::mutex> lk(fail_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < res.threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    for (int vi = 0; vi < V; ++vi)
        for (size_t pi = 0; pi < policies.size(); ++pi) {
            ResultRow row;
            row.parameter = spec.parameter.empty() ? "none" : spec.parameter;
            row.value = values[vi];
            row.policy = policies[pi].label();
            row.runs = R;
            std::vector<double> tot, pw, rb, lb, ac, ci, di;
            for (int run = 0; run < R; ++run) {
                const auto& ro = results[static_cast<size_t>(vi) * R + run][pi];
                tot.push_back(ro.cost.total);
                pw.push_back(ro.cost.power_cost);
                rb.push_back(ro.cost.radio_bw_cost);
                lb.push_back(ro.cost.link_bw_cost);
                ac.push_back(ro.cost.acceptance_ratio);
                ci.push_back(ro.caching_iters);
                di.push_back(ro.delivery_iters);
                row.max_asm_iters = std::max({row.max_asm_iters, ro.caching_iters, ro.delivery_iters});
                row.audit_violations += ro.audit_violations;
                row.nonmonotone_traces += ro.nonmonotone_traces;
                row.infeasible_runs += ro.infeasible;
                row.wall_time += task_time[static_cast<size_t>(vi) * R + run] / policies.size();
                for (const auto& m : ro.audit_messages) res.audit_messages.push_back(m);
                if (run == 0) {
                    for (size_t k = 0; k < ro.caching_trace.size(); ++k)
                        res.traces.push_back({values[vi], row.policy, "caching", static_cast<int>(k), ro.caching_trace[k]});
                    for (size_t k = 0; k < ro.delivery_trace.size(); ++k)
                        res.traces.push_back({values[vi], row.policy, "delivery", static_cast<int>(k), ro.delivery_trace[k]});
                }
            }
            double unused;
            mean_std(tot, row.total_mean, row.total_std);
            mean_std(pw, row.power_mean, row.power_std);
            mean_std(rb, row.radio_mean, row.radio_std);
            mean_std(lb, row.link_mean, row.link_std);
            mean_std(ac, row.acceptance_mean, row.acceptance_std);
            mean_std(ci, row.caching_iters_mean, unused);
            mean_std(di, row.delivery_iters_mean, unused);
            res.rows.push_back(row);
        }
    res.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
    return res;
}

const char* const kCsvHeader =
    "swept_parameter,value,policy,runs,total_mean,total_std,power_mean,power_std,radio_bw_mean,radio_bw_std,"
    "link_bw_mean,link_bw_std,acceptance_mean,acceptance_std,caching_iters_mean,delivery_iters_mean,"
    "max_asm_iters,audit_violations,nonmonotone_traces,infeasible_runs";

namespace {

// Shortest representation that round-trips.
std::string fmt(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
    std::string s = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows) {
        s += r.parameter + "," + fmt(r.value) + "," + r.policy + "," + std::to_string(r.runs) + ",";
        for (double v : {r.total_mean, r.total_std, r.power_mean, r.power_std, r.radio_mean, r.radio_std, r.link_mean,
                         r.link_std, r.acceptance_mean, r.acceptance_std, r.caching_iters_mean, r.delivery_iters_mean})
            s += fmt(v) + ",";
        s += std::to_string(r.max_asm_iters) + "," + std::to_string(r.audit_violations) + "," +
             std::to_string(r.nonmonotone_traces) + "," + std::to_string(r.infeasible_runs) + "\n";
    }
    return s;
}

std::string traces_to_csv(const std::vector<TraceRow>& rows) {
    std::string s = "value,policy,phase,iteration,objective\n";
    for (const auto& r : rows)
        s += fmt(r.value) + "," + r.policy + "," + r.phase + "," + std::to_string(r.iteration) + "," + fmt(r.objective) + "\n";
    return s;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

json manifest(const HarnessConfig& cfg, const SweepSpec& spec, const SweepResult& res) {
    json cj = config_to_json(cfg);
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(cj.dump())));
    json rows = json::array();
    for (const auto& r : res.rows)
        rows.push_back({{"value", r.value}, {"policy", r.policy}, {"wall_time_s", r.wall_time}});
    std::vector<std::string> run_seeds;
    for (int run = 0; run < spec.runs; ++run) run_seeds.push_back(std::to_string(run_seed(spec.seed, run)));
    return {{"schema", "hetnet-sweep-manifest/1"},
            {"version", "0.1.0"},
            {"compiler", __VERSION__},
            {"config", cj},
            {"config_hash_fnv1a64", hash},
            {"seed", spec.seed},
            {"run_seeds", run_seeds},
            {"swept_parameter", spec.parameter.empty() ? "none" : spec.parameter},
            {"values", spec.values},
            {"policies", spec.policies},
            {"runs", spec.runs},
            {"threads", res.threads},
            {"csv_columns", kCsvHeader},
            {"wall_time_s", res.wall_time},
            {"rows", rows}};
}

}  // namespace hetnet

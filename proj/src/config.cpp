#include "orthomg/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace orthomg {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s)
{
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = s.find(',');
        out.push_back(trim(s.substr(0, comma)));
        if (comma == std::string_view::npos) {
            break;
        }
        s.remove_prefix(comma + 1);
    }
    return out;
}

std::size_t to_size(std::string_view v)
{
    std::size_t out = 0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || end != v.data() + v.size()) {
        throw InvalidInput("expected a non-negative integer, got '" + std::string(v) + "'");
    }
    return out;
}

double to_double(std::string_view v)
{
    double out = 0.0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || end != v.data() + v.size()) {
        throw InvalidInput("expected a number, got '" + std::string(v) + "'");
    }
    return out;
}

bool to_bool(std::string_view v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw InvalidInput("expected true or false, got '" + std::string(v) + "'");
}

std::string fmt(double v)
{
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string fmt(std::size_t v) { return std::to_string(v); }

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& f)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += (i ? "," : "") + std::string(f(items[i]));
    }
    return out;
}

std::vector<std::size_t> to_size_list(std::string_view v)
{
    std::vector<std::size_t> out;
    for (auto item : split_list(v)) {
        out.push_back(to_size(item));
    }
    return out;
}

RhsMode parse_rhs_mode(std::string_view v)
{
    if (v == "constant") return RhsMode::constant;
    if (v == "zero") return RhsMode::zero;
    if (v == "random") return RhsMode::random;
    throw InvalidInput("expected constant, zero or random, got '" + std::string(v) + "'");
}

struct Field {
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

// Ordered: serialization emits the keys in this order.
const std::vector<std::pair<std::string, Field>>& fields()
{
    using C = RunConfig;
    using V = std::string_view;
    static const std::vector<std::pair<std::string, Field>> table = {
        {"problem.dimension",
         {[](const C& c) { return std::to_string(c.problem.dimension); },
          [](C& c, V v) { c.problem.dimension = static_cast<int>(to_size(v)); }}},
        {"problem.half_width",
         {[](const C& c) { return fmt(c.problem.half_width); },
          [](C& c, V v) { c.problem.half_width = to_double(v); }}},
        {"problem.cells_per_axis",
         {[](const C& c) { return fmt(c.problem.cells_per_axis); },
          [](C& c, V v) { c.problem.cells_per_axis = to_size(v); }}},
        {"problem.radius_factor",
         {[](const C& c) { return fmt(c.problem.radius_factor); },
          [](C& c, V v) { c.problem.radius_factor = to_double(v); }}},
        {"problem.k_inner",
         {[](const C& c) { return fmt(c.problem.k_inner); },
          [](C& c, V v) { c.problem.k_inner = to_double(v); }}},
        {"problem.k_outer",
         {[](const C& c) { return fmt(c.problem.k_outer); },
          [](C& c, V v) { c.problem.k_outer = to_double(v); }}},
        {"problem.rhs_constant",
         {[](const C& c) { return fmt(c.problem.rhs_constant); },
          [](C& c, V v) { c.problem.rhs_constant = to_double(v); }}},
        {"problem.rhs_mode",
         {[](const C& c) { return std::string(to_string(c.rhs_mode)); },
          [](C& c, V v) { c.rhs_mode = parse_rhs_mode(v); }}},
        {"hierarchy.min_coarse_dofs",
         {[](const C& c) { return fmt(c.min_coarse_dofs); },
          [](C& c, V v) { c.min_coarse_dofs = to_size(v); }}},
        {"solver.variant",
         {[](const C& c) { return std::string(to_string(c.variant)); },
          [](C& c, V v) { c.variant = parse_variant(v); }}},
        {"solver.variants",
         {[](const C& c) { return join(c.variants, [](Variant x) { return to_string(x); }); },
          [](C& c, V v) {
              c.variants.clear();
              for (auto item : split_list(v)) {
                  c.variants.push_back(parse_variant(item));
              }
          }}},
        {"solver.max_outer_iterations",
         {[](const C& c) { return fmt(c.max_outer_iterations); },
          [](C& c, V v) { c.max_outer_iterations = to_size(v); }}},
        {"criteria.rel_tol",
         {[](const C& c) { return fmt(c.criteria.rel_tol); },
          [](C& c, V v) { c.criteria.rel_tol = to_double(v); }}},
        {"criteria.abs_tol",
         {[](const C& c) { return fmt(c.criteria.abs_tol); },
          [](C& c, V v) { c.criteria.abs_tol = to_double(v); }}},
        {"criteria.level1_factor",
         {[](const C& c) { return fmt(c.criteria.level1_factor); },
          [](C& c, V v) { c.criteria.level1_factor = to_double(v); }}},
        {"criteria.level1_max_iterations",
         {[](const C& c) { return fmt(c.criteria.level1_max_iterations); },
          [](C& c, V v) { c.criteria.level1_max_iterations = to_size(v); }}},
        {"criteria.level2_factor",
         {[](const C& c) { return fmt(c.criteria.level2_factor); },
          [](C& c, V v) { c.criteria.level2_factor = to_double(v); }}},
        {"criteria.level2_max_iterations",
         {[](const C& c) { return fmt(c.criteria.level2_max_iterations); },
          [](C& c, V v) { c.criteria.level2_max_iterations = to_size(v); }}},
        {"criteria.deeper_iterations",
         {[](const C& c) { return fmt(c.criteria.deeper_iterations); },
          [](C& c, V v) { c.criteria.deeper_iterations = to_size(v); }}},
        {"smoother.kind",
         {[](const C& c) {
              return std::string(c.smoother.kind == SmootherConfig::Kind::schwarz ? "schwarz"
                                                                                  : "block_jacobi");
          },
          [](C& c, V v) {
              if (v == "schwarz") {
                  c.smoother.kind = SmootherConfig::Kind::schwarz;
              } else if (v == "block_jacobi") {
                  c.smoother.kind = SmootherConfig::Kind::block_jacobi;
              } else {
                  throw InvalidInput("expected schwarz or block_jacobi, got '" + std::string(v) +
                                     "'");
              }
          }}},
        {"smoother.overlap",
         {[](const C& c) { return fmt(c.smoother.overlap); },
          [](C& c, V v) { c.smoother.overlap = to_size(v); }}},
        {"smoother.precision",
         {[](const C& c) {
              return std::string(c.smoother.precision == Precision::float64 ? "float64" : "float32");
          },
          [](C& c, V v) {
              if (v == "float64") {
                  c.smoother.precision = Precision::float64;
              } else if (v == "float32") {
                  c.smoother.precision = Precision::float32;
              } else {
                  throw InvalidInput("expected float64 or float32, got '" + std::string(v) + "'");
              }
          }}},
        {"smoother.iterations",
         {[](const C& c) { return fmt(c.smoother.iterations); },
          [](C& c, V v) { c.smoother.iterations = to_size(v); }}},
        {"smoother.subdomains",
         {[](const C& c) { return fmt(c.smoother.subdomains); },
          [](C& c, V v) { c.smoother.subdomains = to_size(v); }}},
        {"smoother.min_subdomain_cells",
         {[](const C& c) { return fmt(c.smoother.min_subdomain_cells); },
          [](C& c, V v) { c.smoother.min_subdomain_cells = to_size(v); }}},
        {"smoother.tile",
         {[](const C& c) { return fmt(c.smoother.tile); },
          [](C& c, V v) { c.smoother.tile = to_size(v); }}},
        {"smoother.omega",
         {[](const C& c) { return fmt(c.smoother.omega); },
          [](C& c, V v) { c.smoother.omega = to_double(v); }}},
        {"smoother.sweeps",
         {[](const C& c) { return fmt(c.smoother.sweeps); },
          [](C& c, V v) { c.smoother.sweeps = to_size(v); }}},
        {"workers",
         {[](const C& c) { return fmt(c.workers); },
          [](C& c, V v) { c.workers = to_size(v); }}},
        {"coarsest_workers",
         {[](const C& c) { return fmt(c.coarsest_workers); },
          [](C& c, V v) { c.coarsest_workers = to_size(v); }}},
        {"scheduler.mode",
         {[](const C& c) {
              return std::string(c.scheduler.kind == SchedulerMode::Kind::realtime
                                     ? "realtime"
                                     : "deterministic");
          },
          [](C& c, V v) {
              if (v == "realtime") {
                  c.scheduler.kind = SchedulerMode::Kind::realtime;
              } else if (v == "deterministic") {
                  c.scheduler.kind = SchedulerMode::Kind::deterministic;
              } else {
                  throw InvalidInput("expected realtime or deterministic, got '" +
                                     std::string(v) + "'");
              }
          }}},
        {"scheduler.sweeps_per_cycle",
         {[](const C& c) { return fmt(c.scheduler.sweeps_per_cycle); },
          [](C& c, V v) { c.scheduler.sweeps_per_cycle = to_size(v); }}},
        {"scheduler.watchdog_seconds",
         {[](const C& c) { return fmt(c.watchdog_seconds); },
          [](C& c, V v) { c.watchdog_seconds = to_double(v); }}},
        {"transfer.placement",
         {[](const C& c) { return std::string(to_string(c.placement)); },
          [](C& c, V v) { c.placement = parse_placement(v); }}},
        {"seed",
         {[](const C& c) { return std::to_string(c.seed); },
          [](C& c, V v) { c.seed = to_size(v); }}},
        {"output.directory",
         {[](const C& c) { return c.output_directory; },
          [](C& c, V v) { c.output_directory = std::string(v); }}},
        {"output.trace",
         {[](const C& c) { return std::string(c.write_trace ? "true" : "false"); },
          [](C& c, V v) { c.write_trace = to_bool(v); }}},
        {"bench.repetitions",
         {[](const C& c) { return fmt(c.repetitions); },
          [](C& c, V v) { c.repetitions = to_size(v); }}},
        {"bench.workers",
         {[](const C& c) { return join(c.bench_workers, [](std::size_t x) { return fmt(x); }); },
          [](C& c, V v) { c.bench_workers = to_size_list(v); }}},
        {"bench.sizes",
         {[](const C& c) { return join(c.bench_sizes, [](std::size_t x) { return fmt(x); }); },
          [](C& c, V v) { c.bench_sizes = v.empty() ? std::vector<std::size_t>{} : to_size_list(v); }}},
    };
    return table;
}

const Field* find_field(std::string_view key)
{
    for (const auto& [name, field] : fields()) {
        if (name == key) {
            return &field;
        }
    }
    return nullptr;
}

}  // namespace

std::string_view to_string(RhsMode m)
{
    switch (m) {
    case RhsMode::constant: return "constant";
    case RhsMode::zero: return "zero";
    case RhsMode::random: return "random";
    }
    return "unknown";
}

ConfigError::ConfigError(std::size_t line, const std::string& key, const std::string& what)
    : InvalidInput((line ? "config line " + std::to_string(line) + ": " : "config: ") +
                   (key.empty() ? "" : "key '" + key + "': ") + what),
      line_(line), key_(key)
{
}

void RunConfig::validate() const
{
    problem.validate();
    criteria.validate();
    smoother.validate();
    scheduler.validate();
    if (min_coarse_dofs < 4) {
        throw InvalidInput("hierarchy.min_coarse_dofs must be >= 4");
    }
    if (variants.empty()) {
        throw InvalidInput("solver.variants must list at least one variant");
    }
    if (max_outer_iterations == 0) {
        throw InvalidInput("solver.max_outer_iterations must be >= 1");
    }
    if (workers == 0) {
        throw InvalidInput("workers must be >= 1");
    }
    if (coarsest_workers == 0) {
        throw InvalidInput("coarsest_workers must be >= 1");
    }
    if (!(watchdog_seconds > 0.0)) {
        throw InvalidInput("scheduler.watchdog_seconds must be positive");
    }
    if (output_directory.empty()) {
        throw InvalidInput("output.directory must not be empty");
    }
    if (repetitions == 0) {
        throw InvalidInput("bench.repetitions must be >= 1");
    }
    if (bench_workers.empty()) {
        throw InvalidInput("bench.workers must list at least one count");
    }
    for (auto w : bench_workers) {
        if (w == 0) {
            throw InvalidInput("bench.workers entries must be >= 1");
        }
    }
    for (auto n : bench_sizes) {
        ProblemSpec p = problem;
        p.cells_per_axis = n;
        try {
            p.validate();
        } catch (const InvalidInput& e) {
            throw InvalidInput("bench.sizes: " + std::string(e.what()));
        }
    }
}

CycleConfig RunConfig::cycle_config(Variant v) const
{
    CycleConfig c;
    c.variant = v;
    c.criteria = criteria;
    c.max_outer_iterations = max_outer_iterations;
    return c;
}

AsyncOptions RunConfig::async_options() const
{
    AsyncOptions o;
    o.scheduler = scheduler;
    o.placement = placement;
    o.watchdog = std::chrono::milliseconds(
        static_cast<std::chrono::milliseconds::rep>(watchdog_seconds * 1000.0));
    return o;
}

RunConfig parse_config(std::string_view text)
{
    RunConfig cfg;
    std::map<std::string, std::size_t, std::less<>> seen;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(line_no, "", "expected 'key = value', got '" + std::string(line) + "'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        const Field* field = find_field(key);
        if (field == nullptr) {
            throw ConfigError(line_no, key, "unknown key");
        }
        if (auto it = seen.find(key); it != seen.end()) {
            throw ConfigError(line_no, key,
                              "duplicate key (first set on line " + std::to_string(it->second) + ")");
        }
        seen.emplace(key, line_no);
        try {
            field->set(cfg, value);
        } catch (const std::exception& e) {
            throw ConfigError(line_no, key, e.what());
        }
    }
    try {
        cfg.validate();
    } catch (const InvalidInput& e) {
        // Point at the offending line when the message names a key we saw.
        const std::string msg = e.what();
        std::string best;
        for (const auto& [name, field] : fields()) {
            if (name.size() > best.size() && msg.find(name) != std::string::npos) {
                best = name;
            }
        }
        const auto it = seen.find(best);
        throw ConfigError(it == seen.end() ? 0 : it->second, best, msg);
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot read config file '" + path.string() + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string serialize(const RunConfig& config)
{
    std::string out;
    for (const auto& [name, field] : fields()) {
        out += name + " = " + field.get(config) + "\n";
    }
    return out;
}

std::uint64_t digest(const RunConfig& config)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : serialize(config)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string digest_hex(const RunConfig& config)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest(config)));
    return buf;
}

bool apply_environment(RunConfig& config)
{
    const char* raw = std::getenv(kWorkersEnv);
    if (raw == nullptr || *raw == '\0') {
        return false;
    }
    std::size_t w = 0;
    try {
        w = to_size(trim(raw));
    } catch (const InvalidInput&) {
        throw InvalidInput(std::string(kWorkersEnv) + " must be a positive integer, got '" + raw +
                           "'");
    }
    if (w == 0) {
        throw InvalidInput(std::string(kWorkersEnv) + " must be >= 1");
    }
    config.workers = w;
    return true;
}

}  // namespace orthomg

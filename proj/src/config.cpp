#include "fairsched/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

namespace fairsched {

namespace {

using Json = nlohmann::ordered_json;

// Character iterator that counts lines as the JSON lexer consumes input, so
// that parse callbacks can tell which line a key or value ended on.
struct LineCounter {
    std::size_t line = 1;
    std::size_t last_token_line = 1;
};

class CountingIterator {
public:
    using iterator_category = std::input_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    CountingIterator() = default;
    CountingIterator(const char* p, LineCounter* counter) : p_(p), counter_(counter) {}

    reference operator*() const { return *p_; }
    CountingIterator& operator++() {
        const char c = *p_;
        if (c == '\n') {
            ++counter_->line;
        } else if (c != ' ' && c != '\t' && c != '\r') {
            counter_->last_token_line = counter_->line;
        }
        ++p_;
        return *this;
    }
    CountingIterator operator++(int) {
        CountingIterator old = *this;
        ++*this;
        return old;
    }
    bool operator==(const CountingIterator& o) const { return p_ == o.p_; }
    bool operator!=(const CountingIterator& o) const { return p_ != o.p_; }

private:
    const char* p_ = nullptr;
    LineCounter* counter_ = nullptr;
};

std::string escape_pointer_token(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '~') {
            out += "~0";
        } else if (c == '/') {
            out += "~1";
        } else {
            out += c;
        }
    }
    return out;
}

struct Frame {
    bool is_array = false;
    std::string key;
    long index = -1;
};

class LineMap {
public:
    void record(const std::vector<Frame>& stack, std::size_t line) {
        lines_.emplace(pointer(stack), line);
    }
    std::size_t line_of(const std::string& ptr) const {
        // Fall back to the closest recorded ancestor.
        std::string p = ptr;
        while (true) {
            auto it = lines_.find(p);
            if (it != lines_.end()) {
                return it->second;
            }
            if (p.empty()) {
                return 0;
            }
            p = p.substr(0, p.rfind('/'));
        }
    }
    static std::string pointer(const std::vector<Frame>& stack) {
        std::string out;
        for (const auto& f : stack) {
            out += '/';
            out += f.is_array ? std::to_string(f.index) : escape_pointer_token(f.key);
        }
        return out;
    }

private:
    std::map<std::string, std::size_t> lines_;
};

class Reader {
public:
    Reader(std::string source, const LineMap& lines) : source_(std::move(source)), lines_(lines) {}

    [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
        std::ostringstream os;
        os << source_;
        const std::size_t line = lines_.line_of(ptr);
        if (line > 0) {
            os << ':' << line;
        }
        os << ": " << (ptr.empty() ? "/" : ptr) << ": " << msg;
        throw ConfigError(os.str());
    }

    const Json& require(const Json& obj, const std::string& ptr, const char* key) const {
        if (!obj.contains(key)) {
            fail(ptr, std::string("missing required field '") + key + "'");
        }
        return obj.at(key);
    }

    void reject_unknown(const Json& obj, const std::string& ptr,
                        std::initializer_list<const char*> allowed) const {
        if (!obj.is_object()) {
            fail(ptr, "expected an object");
        }
        for (const auto& item : obj.items()) {
            const bool known = std::any_of(allowed.begin(), allowed.end(),
                                           [&](const char* k) { return item.key() == k; });
            if (!known) {
                fail(ptr + "/" + escape_pointer_token(item.key()),
                     "unknown field '" + item.key() + "'");
            }
        }
    }

    double number(const Json& v, const std::string& ptr) const {
        if (!v.is_number()) {
            fail(ptr, "expected a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            fail(ptr, "expected a finite number");
        }
        return x;
    }

    std::size_t count(const Json& v, const std::string& ptr) const {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            fail(ptr, "expected a nonnegative integer");
        }
        return static_cast<std::size_t>(v.get<unsigned long long>());
    }

    std::string text(const Json& v, const std::string& ptr) const {
        if (!v.is_string()) {
            fail(ptr, "expected a string");
        }
        return v.get<std::string>();
    }

    Matrix matrix(const Json& v, const std::string& ptr) const {
        if (!v.is_array() || v.empty()) {
            fail(ptr, "expected a non-empty array of rows");
        }
        const std::size_t rows = v.size();
        std::size_t cols = 0;
        for (std::size_t i = 0; i < rows; ++i) {
            const std::string rp = ptr + "/" + std::to_string(i);
            if (!v[i].is_array() || v[i].empty()) {
                fail(rp, "expected a non-empty array of numbers");
            }
            if (i == 0) {
                cols = v[i].size();
            } else if (v[i].size() != cols) {
                fail(rp, "row has " + std::to_string(v[i].size()) + " entries, expected " +
                             std::to_string(cols));
            }
        }
        Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
                M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    number(v[i][j], ptr + "/" + std::to_string(i) + "/" + std::to_string(j));
            }
        }
        return M;
    }

private:
    std::string source_;
    const LineMap& lines_;
};

// Maps a SystemModel::validate message ("label: Q is ...") to the field.
std::string field_of_model_error(const std::string& msg, const std::string& label) {
    const std::string head = label + ": ";
    if (msg.rfind(head, 0) == 0 && msg.size() > head.size()) {
        const char f = msg[head.size()];
        if ((f == 'A' || f == 'C' || f == 'Q' || f == 'R') &&
            (msg.size() == head.size() + 1 || msg[head.size() + 1] == ' ')) {
            return std::string("/") + f;
        }
    }
    return "";
}

SystemModel read_system(const Reader& rd, const Json& v, const std::string& ptr,
                        std::size_t index) {
    rd.reject_unknown(v, ptr, {"label", "A", "C", "Q", "R"});
    SystemModel sys;
    sys.label = v.contains("label") ? rd.text(v["label"], ptr + "/label")
                                    : "sensor" + std::to_string(index + 1);
    sys.A = rd.matrix(rd.require(v, ptr, "A"), ptr + "/A");
    sys.C = rd.matrix(rd.require(v, ptr, "C"), ptr + "/C");
    sys.Q = rd.matrix(rd.require(v, ptr, "Q"), ptr + "/Q");
    sys.R = rd.matrix(rd.require(v, ptr, "R"), ptr + "/R");
    try {
        sys.validate();
    } catch (const std::invalid_argument& e) {
        rd.fail(ptr + field_of_model_error(e.what(), sys.label), e.what());
    }
    return sys;
}

std::vector<double> read_q_list(const Reader& rd, const Json& v, const std::string& ptr,
                                bool allow_empty) {
    if (!v.is_array() || (!allow_empty && v.empty())) {
        rd.fail(ptr, allow_empty ? "expected an array of numbers"
                                 : "expected a non-empty array of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = ptr + "/" + std::to_string(i);
        const double q = rd.number(v[i], p);
        if (q < 0.0) {
            rd.fail(p, "q must be >= 0, got " + v[i].dump());
        }
        out.push_back(q);
    }
    return out;
}

void read_solver(const Reader& rd, const Json& v, const std::string& ptr, SolverConfig& s) {
    rd.reject_unknown(v, ptr, {"alpha", "gamma0", "max_iter", "epsilon", "tol_violation",
                               "tol_objective", "patience"});
    if (v.contains("alpha")) s.alpha = rd.number(v["alpha"], ptr + "/alpha");
    if (v.contains("gamma0")) s.gamma0 = rd.number(v["gamma0"], ptr + "/gamma0");
    if (v.contains("max_iter")) s.max_iter = rd.count(v["max_iter"], ptr + "/max_iter");
    if (v.contains("epsilon")) s.epsilon = rd.number(v["epsilon"], ptr + "/epsilon");
    if (v.contains("tol_violation"))
        s.tol_violation = rd.number(v["tol_violation"], ptr + "/tol_violation");
    if (v.contains("tol_objective"))
        s.tol_objective = rd.number(v["tol_objective"], ptr + "/tol_objective");
    if (v.contains("patience")) s.patience = rd.count(v["patience"], ptr + "/patience");
}

void read_mdp(const Reader& rd, const Json& v, const std::string& ptr, MdpConfig& m,
              std::size_t& rollout_horizon) {
    rd.reject_unknown(v, ptr, {"tau_max", "tol_span", "max_sweeps", "relaxation",
                               "rollout_horizon"});
    if (v.contains("tau_max")) {
        const std::size_t t = rd.count(v["tau_max"], ptr + "/tau_max");
        if (t > 255) {
            rd.fail(ptr + "/tau_max", "tau_max above 255 is not supported");
        }
        m.tau_max = static_cast<std::uint32_t>(t);
    }
    if (v.contains("tol_span")) m.tol_span = rd.number(v["tol_span"], ptr + "/tol_span");
    if (v.contains("max_sweeps")) m.max_sweeps = rd.count(v["max_sweeps"], ptr + "/max_sweeps");
    if (v.contains("relaxation")) m.relaxation = rd.number(v["relaxation"], ptr + "/relaxation");
    if (v.contains("rollout_horizon"))
        rollout_horizon = rd.count(v["rollout_horizon"], ptr + "/rollout_horizon");
}

GreedyPricing parse_pricing(const Reader& rd, const std::string& s, const std::string& ptr) {
    if (s == "current_holding") return GreedyPricing::current_holding;
    if (s == "next_holding") return GreedyPricing::next_holding;
    rd.fail(ptr, "unknown pricing '" + s + "' (expected current_holding or next_holding)");
}

std::string pricing_name(GreedyPricing p) {
    return p == GreedyPricing::current_holding ? "current_holding" : "next_holding";
}

void read_greedy(const Reader& rd, const Json& v, const std::string& ptr, GreedyConfig& g) {
    rd.reject_unknown(v, ptr, {"horizon", "pricing", "tie_break", "initial_tau"});
    if (v.contains("horizon")) g.horizon = rd.count(v["horizon"], ptr + "/horizon");
    if (v.contains("pricing"))
        g.pricing = parse_pricing(rd, rd.text(v["pricing"], ptr + "/pricing"), ptr + "/pricing");
    if (v.contains("tie_break")) {
        g.tie_break = rd.text(v["tie_break"], ptr + "/tie_break");
        if (g.tie_break != "lowest_index") {
            rd.fail(ptr + "/tie_break", "unknown tie-break rule '" + g.tie_break +
                                            "' (only lowest_index is supported)");
        }
    }
    if (v.contains("initial_tau")) {
        const Json& arr = v["initial_tau"];
        if (!arr.is_array()) {
            rd.fail(ptr + "/initial_tau", "expected an array of holding times");
        }
        g.initial_tau.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string p = ptr + "/initial_tau/" + std::to_string(i);
            g.initial_tau.push_back(static_cast<std::uint32_t>(rd.count(arr[i], p)));
        }
    }
}

Json matrix_json(const Matrix& M) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            row.push_back(M(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::string to_string(ExperimentCase c) { return c == ExperimentCase::rate ? "rate" : "activation"; }

std::string to_string(Method m) {
    switch (m) {
        case Method::subgradient: return "subgradient";
        case Method::mdp: return "mdp";
        case Method::greedy: return "greedy";
        case Method::all: return "all";
    }
    return "all";
}

ExperimentCase parse_case(const std::string& s) {
    if (s == "rate") return ExperimentCase::rate;
    if (s == "activation") return ExperimentCase::activation;
    throw ConfigError("unknown case '" + s + "' (expected rate or activation)");
}

Method parse_method(const std::string& s) {
    if (s == "subgradient") return Method::subgradient;
    if (s == "mdp") return Method::mdp;
    if (s == "greedy") return Method::greedy;
    if (s == "all") return Method::all;
    throw ConfigError("unknown method '" + s + "' (expected subgradient, mdp, greedy or all)");
}

std::size_t ExperimentConfig::activation_budget() const {
    return static_cast<std::size_t>(std::llround(budget));
}

void ExperimentConfig::validate() const {
    if (systems.empty()) {
        throw ConfigError("systems: at least one system is required");
    }
    for (const auto& s : systems) {
        try {
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("systems: ") + e.what());
        }
    }
    if (q_values.empty()) {
        throw ConfigError("q_values: at least one value is required");
    }
    for (double q : q_values) {
        if (!std::isfinite(q) || q < 0.0) {
            throw ConfigError("q_values: q must be finite and >= 0");
        }
    }
    if (!(budget > 0.0) || !std::isfinite(budget)) {
        throw ConfigError("budget must be positive");
    }
    if (experiment_case == ExperimentCase::activation) {
        if (std::abs(budget - std::round(budget)) > 0.0) {
            throw ConfigError("Z must be an integer");
        }
    } else if (method == Method::mdp || method == Method::greedy) {
        throw ConfigError("method " + to_string(method) +
                          " applies to the activation case only");
    }
    if (!greedy.initial_tau.empty() && greedy.initial_tau.size() != systems.size()) {
        throw ConfigError("greedy.initial_tau must have one entry per system");
    }
    if (!(solver.alpha > 0.0) || !(solver.gamma0 > 0.0) || solver.max_iter == 0) {
        throw ConfigError("solver: alpha, gamma0 and max_iter must be positive");
    }
    if (!(solver.epsilon > 0.0 && solver.epsilon < 1.0)) {
        throw ConfigError("solver.epsilon must lie in (0, 1)");
    }
    if (mdp.tau_max < 1 || !(mdp.tol_span > 0.0) || mdp.max_sweeps == 0) {
        throw ConfigError("mdp: tau_max, tol_span and max_sweeps must be positive");
    }
    if (!(mdp.relaxation > 0.0 && mdp.relaxation <= 1.0)) {
        throw ConfigError("mdp.relaxation must lie in (0, 1]");
    }
    if (greedy.horizon == 0 || rollout_horizon == 0) {
        throw ConfigError("greedy.horizon and mdp.rollout_horizon must be positive");
    }
    if (output.empty()) {
        throw ConfigError("output must be a non-empty path");
    }
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
    if (systems.size() != o.systems.size()) {
        return false;
    }
    for (std::size_t i = 0; i < systems.size(); ++i) {
        const auto& a = systems[i];
        const auto& b = o.systems[i];
        auto same = [](const Matrix& x, const Matrix& y) {
            return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
        };
        if (a.label != b.label || !same(a.A, b.A) || !same(a.C, b.C) || !same(a.Q, b.Q) ||
            !same(a.R, b.R)) {
            return false;
        }
    }
    const auto& s = solver;
    const auto& t = o.solver;
    return experiment_case == o.experiment_case && q_values == o.q_values &&
           highlight_q == o.highlight_q && budget == o.budget && method == o.method &&
           s.alpha == t.alpha && s.gamma0 == t.gamma0 && s.max_iter == t.max_iter &&
           s.epsilon == t.epsilon && s.tol_violation == t.tol_violation &&
           s.tol_objective == t.tol_objective && s.patience == t.patience && s.seed == t.seed &&
           mdp.tau_max == o.mdp.tau_max && mdp.tol_span == o.mdp.tol_span &&
           mdp.max_sweeps == o.mdp.max_sweeps && mdp.relaxation == o.mdp.relaxation &&
           greedy.horizon == o.greedy.horizon && greedy.initial_tau == o.greedy.initial_tau &&
           greedy.pricing == o.greedy.pricing && greedy.tie_break == o.greedy.tie_break &&
           rollout_horizon == o.rollout_horizon && seed == o.seed && output == o.output;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
    LineCounter counter;
    LineMap lines;
    std::vector<Frame> stack;
    auto callback = [&](int, Json::parse_event_t event, Json& parsed) {
        auto enter_element = [&] {
            if (!stack.empty() && stack.back().is_array) {
                ++stack.back().index;
                lines.record(stack, counter.last_token_line);
            }
        };
        switch (event) {
            case Json::parse_event_t::object_start:
            case Json::parse_event_t::array_start:
                enter_element();
                if (stack.empty()) {
                    lines.record(stack, counter.last_token_line);
                }
                stack.push_back({event == Json::parse_event_t::array_start, "", -1});
                break;
            case Json::parse_event_t::key:
                stack.back().key = parsed.get<std::string>();
                lines.record(stack, counter.last_token_line);
                break;
            case Json::parse_event_t::value:
                enter_element();
                break;
            case Json::parse_event_t::object_end:
            case Json::parse_event_t::array_end:
                stack.pop_back();
                break;
        }
        return true;
    };

    Json root;
    try {
        root = Json::parse(CountingIterator(text.data(), &counter),
                           CountingIterator(text.data() + text.size(), &counter), callback);
    } catch (const Json::parse_error& e) {
        // e.byte is 1-based and points at the offending character
        const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        const std::size_t line = 1 + static_cast<std::size_t>(
                                         std::count(text.begin(), text.begin() + upto, '\n'));
        const std::size_t bol = text.rfind('\n', upto > 0 ? upto - 1 : 0);
        const std::size_t col = upto - (bol == std::string::npos || upto == 0 ? 0 : bol + 1) + 1;
        std::string what = e.what();
        const auto pos = what.find("syntax error");
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                          (pos == std::string::npos ? what : what.substr(pos)));
    }

    const Reader rd(source, lines);
    if (!root.is_object()) {
        rd.fail("", "top-level value must be an object");
    }
    rd.reject_unknown(root, "", {"systems", "case", "q_values", "highlight_q", "R_total", "Z",
                                 "method", "solver", "mdp", "greedy", "seed", "output"});

    ExperimentConfig cfg;
    const Json& systems = rd.require(root, "", "systems");
    if (!systems.is_array() || systems.empty()) {
        rd.fail("/systems", "expected a non-empty array of systems");
    }
    for (std::size_t i = 0; i < systems.size(); ++i) {
        cfg.systems.push_back(read_system(rd, systems[i], "/systems/" + std::to_string(i), i));
    }

    const std::string case_name = rd.text(rd.require(root, "", "case"), "/case");
    try {
        cfg.experiment_case = parse_case(case_name);
    } catch (const ConfigError& e) {
        rd.fail("/case", e.what());
    }
    cfg.q_values = read_q_list(rd, rd.require(root, "", "q_values"), "/q_values", false);
    if (root.contains("highlight_q")) {
        cfg.highlight_q = read_q_list(rd, root["highlight_q"], "/highlight_q", true);
    }

    const char* budget_key = cfg.experiment_case == ExperimentCase::rate ? "R_total" : "Z";
    const char* other_key = cfg.experiment_case == ExperimentCase::rate ? "Z" : "R_total";
    if (root.contains(other_key)) {
        rd.fail(std::string("/") + other_key, std::string("field '") + other_key +
                                                  "' does not apply to the " + case_name + " case");
    }
    const std::string bptr = std::string("/") + budget_key;
    if (cfg.experiment_case == ExperimentCase::rate) {
        cfg.budget = rd.number(rd.require(root, "", budget_key), bptr);
        if (!(cfg.budget > 0.0)) {
            rd.fail(bptr, "budget must be positive");
        }
    } else {
        const std::size_t z = rd.count(rd.require(root, "", budget_key), bptr);
        if (z == 0) {
            rd.fail(bptr, "Z must be at least 1");
        }
        cfg.budget = static_cast<double>(z);
    }

    if (root.contains("method")) {
        try {
            cfg.method = parse_method(rd.text(root["method"], "/method"));
        } catch (const ConfigError& e) {
            rd.fail("/method", e.what());
        }
    }
    if (root.contains("solver")) read_solver(rd, root["solver"], "/solver", cfg.solver);
    if (root.contains("mdp")) read_mdp(rd, root["mdp"], "/mdp", cfg.mdp, cfg.rollout_horizon);
    if (root.contains("greedy")) read_greedy(rd, root["greedy"], "/greedy", cfg.greedy);
    if (root.contains("seed")) cfg.seed = rd.count(root["seed"], "/seed");
    cfg.solver.seed = cfg.seed;
    if (root.contains("output")) cfg.output = rd.text(root["output"], "/output");

    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        rd.fail("", e.what());
    }
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(path.string() + ": cannot open configuration file");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    Json root;
    Json systems = Json::array();
    for (const auto& s : cfg.systems) {
        Json js;
        js["label"] = s.label;
        js["A"] = matrix_json(s.A);
        js["C"] = matrix_json(s.C);
        js["Q"] = matrix_json(s.Q);
        js["R"] = matrix_json(s.R);
        systems.push_back(std::move(js));
    }
    root["case"] = to_string(cfg.experiment_case);
    root["method"] = to_string(cfg.method);
    root["q_values"] = cfg.q_values;
    root["highlight_q"] = cfg.highlight_q;
    if (cfg.experiment_case == ExperimentCase::rate) {
        root["R_total"] = cfg.budget;
    } else {
        root["Z"] = cfg.activation_budget();
    }
    root["seed"] = cfg.seed;
    root["output"] = cfg.output;
    root["solver"] = {{"alpha", cfg.solver.alpha},
                      {"gamma0", cfg.solver.gamma0},
                      {"max_iter", cfg.solver.max_iter},
                      {"epsilon", cfg.solver.epsilon},
                      {"tol_violation", cfg.solver.tol_violation},
                      {"tol_objective", cfg.solver.tol_objective},
                      {"patience", cfg.solver.patience}};
    root["mdp"] = {{"tau_max", cfg.mdp.tau_max},
                   {"tol_span", cfg.mdp.tol_span},
                   {"max_sweeps", cfg.mdp.max_sweeps},
                   {"relaxation", cfg.mdp.relaxation},
                   {"rollout_horizon", cfg.rollout_horizon}};
    Json greedy = {{"horizon", cfg.greedy.horizon},
                   {"pricing", pricing_name(cfg.greedy.pricing)},
                   {"tie_break", cfg.greedy.tie_break}};
    if (!cfg.greedy.initial_tau.empty()) {
        greedy["initial_tau"] = cfg.greedy.initial_tau;
    }
    root["greedy"] = std::move(greedy);
    root["systems"] = std::move(systems);
    return root.dump(2) + "\n";
}

}  // namespace fairsched

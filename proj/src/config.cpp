#include "drlab/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drlab/util.hpp"

namespace dr {

namespace {

[[noreturn]] void config_error(const std::string& origin, const std::string& what) {
    throw ValidationError(origin + ": " + what);
}

// Line/column of a byte offset, for parse errors.
std::pair<int, int> line_of(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

std::map<int, double> int_keyed_map(const nlohmann::json& j, const std::string& origin,
                                    const std::string& what) {
    if (!j.is_object()) config_error(origin, what + " must be an object of index -> probability");
    std::map<int, double> out;
    for (const auto& [key, val] : j.items()) {
        try {
            out[std::stoi(key)] = val.get<double>();
        } catch (const std::exception&) {
            config_error(origin, what + ": bad entry '" + key + "'");
        }
    }
    return out;
}

std::vector<double> grid_from(const nlohmann::json& j, const std::string& origin) {
    std::vector<double> grid;
    if (j.is_array()) {
        for (const auto& v : j) grid.push_back(v.get<double>());
    } else if (j.is_object()) {
        double start = j.at("start").get<double>();
        double ratio = j.contains("ratio") ? j.at("ratio").get<double>() : 0.5;
        int count = j.at("count").get<int>();
        double v = start;
        for (int i = 0; i < count; ++i) {
            grid.push_back(v);
            v *= ratio;
        }
    } else {
        config_error(origin, "grid must be an array or {start, ratio, count}");
    }
    if (grid.empty()) config_error(origin, "grid is empty");
    return grid;
}

}  // namespace

ModelSpec RunConfig::spec_at(double p_value) const {
    ModelSpec spec;
    spec.nu = nu;
    spec.p = p_value;
    if (family) {
        spec.y0 = family->y0;
        spec.tail = family->meta;
    } else if (y0) {
        spec.y0 = *y0;
    } else {
        throw ValidationError("config: model needs either y0 or family");
    }
    spec.validate();
    return spec;
}

double RunConfig::single_p() const {
    if (!p) throw ValidationError("config: this subcommand needs model.p");
    return *p;
}

double RunConfig::run_number(const std::string& key, double fallback) const {
    if (!run || !run->contains(key)) return fallback;
    return run->at(key).get<double>();
}

int RunConfig::run_int(const std::string& key, int fallback) const {
    if (!run || !run->contains(key)) return fallback;
    return run->at(key).get<int>();
}

std::string RunConfig::run_string(const std::string& key, const std::string& fallback) const {
    if (!run || !run->contains(key)) return fallback;
    return run->at(key).get<std::string>();
}

bool RunConfig::run_has(const std::string& key) const { return run && run->contains(key); }

std::vector<double> RunConfig::run_grid(const std::string& key) const {
    if (!run || !run->contains(key)) throw ValidationError("config: run." + key + " missing");
    return grid_from(run->at(key), "config");
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    auto doc = std::make_shared<nlohmann::json>();
    try {
        *doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        auto [line, col] = line_of(text, e.byte > 0 ? e.byte - 1 : 0);
        config_error(origin + ":" + std::to_string(line) + ":" + std::to_string(col),
                     std::string("JSON parse error: ") + e.what());
    }

    RunConfig cfg;
    cfg.doc = doc;
    try {
        if (!doc->contains("model")) config_error(origin, "missing top-level \"model\"");
        const nlohmann::json& model = doc->at("model");
        cfg.nu = OffspringLaw::from_probs(int_keyed_map(model.at("nu"), origin, "model.nu"));

        if (model.contains("family")) {
            const nlohmann::json& fam = model.at("family");
            std::string kind = fam.at("kind").get<std::string>();
            double m = fam.value("m", cfg.nu.mean());
            int k_max = fam.value("k_max", 0);
            if (kind == "exponential") {
                double theta = fam.at("theta").get<double>();
                if (k_max <= 0) k_max = auto_k_max(TailMeta::Kind::exponential, theta, m, 1e-9);
                cfg.family = make_tail_family(TailMeta::Kind::exponential, theta, m, k_max);
            } else if (kind == "critical") {
                double alpha = fam.at("alpha").get<double>();
                if (k_max <= 0) k_max = auto_k_max(TailMeta::Kind::critical, alpha, m, 1e-9);
                cfg.family = make_tail_family(TailMeta::Kind::critical, alpha, m, k_max);
            } else {
                config_error(origin, "model.family.kind must be \"exponential\" or \"critical\"");
            }
        } else if (model.contains("y0")) {
            std::map<std::int64_t, double> masses;
            std::uint32_t den = 1;
            const nlohmann::json& y = model.at("y0");
            const nlohmann::json& mass_obj = y.is_object() && y.contains("masses") ? y.at("masses") : y;
            if (y.is_object() && y.contains("step")) {
                std::string st = y.at("step").get<std::string>();
                auto slash = st.find('/');
                den = slash == std::string::npos
                          ? 1
                          : static_cast<std::uint32_t>(std::stoul(st.substr(slash + 1)));
            }
            for (const auto& [key, val] : mass_obj.items()) {
                masses[std::stoll(key)] = val.get<double>();
            }
            cfg.y0 = LatticePmf::from_masses(masses, den);
        } else {
            config_error(origin, "model needs \"y0\" or \"family\"");
        }

        if (model.contains("p")) cfg.p = model.at("p").get<double>();
        if (model.contains("p_grid")) cfg.p_grid = grid_from(model.at("p_grid"), origin);
        if (doc->contains("run")) cfg.run = &doc->at("run");
    } catch (const nlohmann::json::exception& e) {
        config_error(origin, std::string("bad config value: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

}  // namespace dr

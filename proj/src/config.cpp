#include "mira/config.hpp"

#include <algorithm>
#include <cctype>
#include <climits>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace mira {

GraphMode graph_mode_from_string(const std::string& name) {
    if (name == "truth") return GraphMode::Truth;
    if (name == "random") return GraphMode::Random;
    if (name == "file") return GraphMode::File;
    throw InvalidConfig("graph.mode", "unknown mode '" + name + "' (expected truth, random or file)");
}

std::string to_string(GraphMode m) {
    switch (m) {
    case GraphMode::Truth: return "truth";
    case GraphMode::Random: return "random";
    default: return "file";
    }
}

Head ExperimentConfig::resolved_head() const {
    if (head) return *head;
    return universe.family == TaskFamily::Classification ? Head::SoftmaxXent : Head::Mse;
}

ModelSpec ExperimentConfig::model_spec() const {
    ModelSpec spec;
    spec.layer_dims.push_back(universe.dim);
    spec.layer_dims.insert(spec.layer_dims.end(), hidden_dims.begin(), hidden_dims.end());
    spec.layer_dims.push_back(universe.out_dim);
    spec.rank = rank;
    spec.activation = activation;
    spec.head = resolved_head();
    spec.init_scale = init_scale;
    spec.lora_scale = lora_scale;
    return spec;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "experiment.strategies",
        "experiment.rounds",
        "experiment.local_steps",
        "experiment.parallel_clients",
        "experiment.output_dir",
        "experiment.write_datasets",
        "server.sample_fraction",
        "server.eta",
        "server.lambda",
        "server.neighbor_mode",
        "model.hidden_dims",
        "model.rank",
        "model.activation",
        "model.head",
        "model.init_scale",
        "model.lora_scale",
        "client.local_lr",
        "client.batch_size",
        "tasks.clients",
        "tasks.clusters",
        "tasks.dim",
        "tasks.out_dim",
        "tasks.family",
        "tasks.intra_spread",
        "tasks.inter_spread",
        "tasks.noise_std",
        "tasks.n_train",
        "tasks.n_test",
        "tasks.size_skew",
        "graph.mode",
        "graph.density",
        "graph.similarity_scale",
        "graph.file",
        "seeds.master",
        "seeds.base_weights",
        "seeds.adapter",
        "seeds.data",
        "seeds.sampling",
        "seeds.graph",
    };
    return keys;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    std::size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s, const std::string& key) {
    std::vector<std::string> items;
    if (trim(s).empty()) return items;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) throw InvalidConfig(key, "empty list item in '" + s + "'");
        items.push_back(item);
    }
    return items;
}

int parse_int(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        if (x < INT_MIN || x > INT_MAX) throw std::out_of_range(s);
        return static_cast<int>(x);
    } catch (const std::exception&) {
        throw InvalidConfig(key, "expected an integer, got '" + s + "'");
    }
}

double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(s, &pos);
        if (pos != s.size() || !std::isfinite(x)) throw std::invalid_argument(s);
        return x;
    } catch (const std::exception&) {
        throw InvalidConfig(key, "expected a finite number, got '" + s + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw InvalidConfig(key, "expected true or false, got '" + s + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
    try {
        if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return static_cast<std::uint64_t>(x);
    } catch (const std::exception&) {
        throw InvalidConfig(key, "expected an unsigned integer, got '" + s + "'");
    }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& s) {
    std::vector<int> out;
    for (const std::string& item : split_list(s, key)) out.push_back(parse_int(key, item));
    return out;
}

std::string env_name(const std::string& key) {
    std::string name = "MIRA_" + key;
    for (char& c : name) {
        if (c == '.') c = '_';
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return name;
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    return out;
}

} // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> entries;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw InvalidConfig("config", "line " + std::to_string(lineno) + ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw InvalidConfig("config", "line " + std::to_string(lineno) + ": empty section name");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig("config", "line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw InvalidConfig("config", "line " + std::to_string(lineno) + ": empty key");
        }
        if (section.empty()) {
            throw InvalidConfig(key, "key appears before any [section] header");
        }
        const std::string full = section + "." + key;
        if (!entries.emplace(full, value).second) {
            throw InvalidConfig(full, "duplicate key");
        }
    }
    return entries;
}

std::map<std::string, std::string> env_overrides() {
    std::map<std::string, std::string> entries;
    for (const std::string& key : config_keys()) {
        if (const char* value = std::getenv(env_name(key).c_str())) entries[key] = value;
    }
    return entries;
}

ExperimentConfig config_from_entries(const std::map<std::string, std::string>& entries) {
    static const std::set<std::string> known(config_keys().begin(), config_keys().end());
    for (const auto& [key, value] : entries) {
        (void)value;
        if (!known.count(key)) throw InvalidConfig(key, "unknown config key");
    }
    const auto get = [&](const std::string& key) -> const std::string* {
        const auto it = entries.find(key);
        return it == entries.end() ? nullptr : &it->second;
    };

    ExperimentConfig cfg;
    if (const auto* v = get("experiment.strategies")) {
        cfg.strategies.clear();
        for (const std::string& item : split_list(*v, "experiment.strategies")) {
            const StrategyKind kind = strategy_from_string(item);
            for (StrategyKind existing : cfg.strategies) {
                if (existing == kind) {
                    throw InvalidConfig("experiment.strategies", "duplicate strategy '" + item + "'");
                }
            }
            cfg.strategies.push_back(kind);
        }
    }
    if (const auto* v = get("experiment.rounds")) cfg.rounds = parse_int("experiment.rounds", *v);
    if (const auto* v = get("experiment.local_steps")) {
        cfg.local_steps = parse_int("experiment.local_steps", *v);
    }
    if (const auto* v = get("experiment.parallel_clients")) {
        cfg.parallel_clients = parse_bool("experiment.parallel_clients", *v);
    }
    if (const auto* v = get("experiment.output_dir")) cfg.output_dir = *v;
    if (const auto* v = get("experiment.write_datasets")) {
        cfg.write_datasets = parse_bool("experiment.write_datasets", *v);
    }

    if (const auto* v = get("server.sample_fraction")) {
        cfg.sample_fraction = parse_double("server.sample_fraction", *v);
    }
    if (const auto* v = get("server.eta")) cfg.eta = parse_double("server.eta", *v);
    if (const auto* v = get("server.lambda")) cfg.lambda = parse_double("server.lambda", *v);
    if (const auto* v = get("server.neighbor_mode")) cfg.neighbor_mode = neighbor_mode_from_string(*v);

    if (const auto* v = get("model.hidden_dims")) cfg.hidden_dims = parse_int_list("model.hidden_dims", *v);
    if (const auto* v = get("model.rank")) cfg.rank = parse_int("model.rank", *v);
    if (const auto* v = get("model.activation")) cfg.activation = activation_from_string(*v);
    if (const auto* v = get("model.head")) {
        if (*v == "auto") cfg.head.reset();
        else cfg.head = head_from_string(*v);
    }
    if (const auto* v = get("model.init_scale")) cfg.init_scale = parse_double("model.init_scale", *v);
    if (const auto* v = get("model.lora_scale")) cfg.lora_scale = parse_double("model.lora_scale", *v);

    if (const auto* v = get("client.local_lr")) cfg.local_lr = parse_double("client.local_lr", *v);
    if (const auto* v = get("client.batch_size")) cfg.batch_size = parse_int("client.batch_size", *v);

    if (const auto* v = get("tasks.clients")) cfg.universe.clients = parse_int("tasks.clients", *v);
    if (const auto* v = get("tasks.clusters")) cfg.universe.clusters = parse_int("tasks.clusters", *v);
    if (const auto* v = get("tasks.dim")) cfg.universe.dim = parse_int("tasks.dim", *v);
    if (const auto* v = get("tasks.out_dim")) cfg.universe.out_dim = parse_int("tasks.out_dim", *v);
    if (const auto* v = get("tasks.family")) cfg.universe.family = task_family_from_string(*v);
    if (const auto* v = get("tasks.intra_spread")) {
        cfg.universe.intra_spread = parse_double("tasks.intra_spread", *v);
    }
    if (const auto* v = get("tasks.inter_spread")) {
        cfg.universe.inter_spread = parse_double("tasks.inter_spread", *v);
    }
    if (const auto* v = get("tasks.noise_std")) cfg.universe.noise_std = parse_double("tasks.noise_std", *v);
    if (const auto* v = get("tasks.n_train")) cfg.universe.n_train = parse_int("tasks.n_train", *v);
    if (const auto* v = get("tasks.n_test")) cfg.universe.n_test = parse_int("tasks.n_test", *v);
    if (const auto* v = get("tasks.size_skew")) cfg.universe.size_skew = parse_double("tasks.size_skew", *v);

    if (const auto* v = get("graph.mode")) cfg.graph_mode = graph_mode_from_string(*v);
    if (const auto* v = get("graph.density")) cfg.graph_density = parse_double("graph.density", *v);
    if (const auto* v = get("graph.similarity_scale")) {
        cfg.similarity_scale = parse_double("graph.similarity_scale", *v);
    }
    if (const auto* v = get("graph.file")) cfg.graph_file = *v;

    if (const auto* v = get("seeds.master")) cfg.seeds.master = parse_u64("seeds.master", *v);
    if (const auto* v = get("seeds.base_weights")) {
        cfg.seeds.base_weights = parse_u64("seeds.base_weights", *v);
    }
    if (const auto* v = get("seeds.adapter")) cfg.seeds.adapter = parse_u64("seeds.adapter", *v);
    if (const auto* v = get("seeds.data")) cfg.seeds.data = parse_u64("seeds.data", *v);
    if (const auto* v = get("seeds.sampling")) cfg.seeds.sampling = parse_u64("seeds.sampling", *v);
    if (const auto* v = get("seeds.graph")) cfg.seeds.graph = parse_u64("seeds.graph", *v);

    validate_config(cfg);
    return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.strategies.empty()) throw InvalidConfig("experiment.strategies", "need at least one strategy");
    if (cfg.rounds < 1) throw InvalidConfig("experiment.rounds", "must be >= 1");
    if (cfg.local_steps < 1) throw InvalidConfig("experiment.local_steps", "must be >= 1");
    if (cfg.output_dir.empty()) throw InvalidConfig("experiment.output_dir", "must not be empty");

    if (!(cfg.sample_fraction > 0.0 && cfg.sample_fraction <= 1.0)) {
        throw InvalidConfig("server.sample_fraction", "must lie in (0, 1]");
    }
    if (!(cfg.eta > 0.0)) throw InvalidConfig("server.eta", "must be positive");
    if (cfg.lambda < 0.0) throw InvalidConfig("server.lambda", "must be >= 0");

    for (int d : cfg.hidden_dims) {
        if (d < 1) throw InvalidConfig("model.hidden_dims", "dims must be positive");
    }
    int max_rank = cfg.universe.dim;
    const ModelSpec spec = cfg.model_spec();
    for (std::size_t i = 0; i + 1 < spec.layer_dims.size(); ++i) {
        max_rank = std::min({max_rank, spec.layer_dims[i], spec.layer_dims[i + 1]});
    }
    if (cfg.rank < 1 || cfg.rank > max_rank) {
        throw InvalidConfig("model.rank",
                            "outside [1, " + std::to_string(max_rank) + "] for these layer dims");
    }
    if (!(cfg.init_scale > 0.0)) throw InvalidConfig("model.init_scale", "must be positive");
    if (!(cfg.lora_scale > 0.0)) throw InvalidConfig("model.lora_scale", "must be positive");

    if (!(cfg.local_lr >= 0.0)) throw InvalidConfig("client.local_lr", "must be >= 0");
    if (cfg.batch_size < 1) throw InvalidConfig("client.batch_size", "must be >= 1");

    if (cfg.universe.clients < 2) throw InvalidConfig("tasks.clients", "need at least 2 clients");

    if (cfg.graph_mode == GraphMode::Random && !(cfg.graph_density >= 0.0 && cfg.graph_density <= 1.0)) {
        throw InvalidConfig("graph.density", "must lie in [0, 1]");
    }
    if (cfg.graph_mode == GraphMode::Truth && !(cfg.similarity_scale > 0.0)) {
        throw InvalidConfig("graph.similarity_scale", "must be positive");
    }
    if (cfg.graph_mode == GraphMode::File && cfg.graph_file.empty()) {
        throw InvalidConfig("graph.file", "file mode needs a path");
    }
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("config", "cannot open '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();

    std::map<std::string, std::string> entries = parse_config_text(text.str());
    for (const auto& [key, value] : env_overrides()) entries[key] = value;
    return config_from_entries(entries);
}

std::string render_config(const ExperimentConfig& cfg) {
    std::vector<std::string> strategy_names;
    for (StrategyKind kind : cfg.strategies) strategy_names.push_back(to_string(kind));
    std::vector<std::string> hidden;
    for (int d : cfg.hidden_dims) hidden.push_back(std::to_string(d));

    std::ostringstream out;
    out << "# effective configuration, fully resolved\n";
    out << "\n[experiment]\n";
    out << "strategies = " << join(strategy_names) << "\n";
    out << "rounds = " << cfg.rounds << "\n";
    out << "local_steps = " << cfg.local_steps << "\n";
    out << "parallel_clients = " << (cfg.parallel_clients ? "true" : "false") << "\n";
    out << "output_dir = " << cfg.output_dir << "\n";
    out << "write_datasets = " << (cfg.write_datasets ? "true" : "false") << "\n";
    out << "\n[server]\n";
    out << "sample_fraction = " << fmt(cfg.sample_fraction) << "\n";
    out << "eta = " << fmt(cfg.eta) << "\n";
    out << "lambda = " << fmt(cfg.lambda) << "\n";
    out << "neighbor_mode = " << to_string(cfg.neighbor_mode) << "\n";
    out << "\n[model]\n";
    out << "hidden_dims = " << join(hidden) << "\n";
    out << "rank = " << cfg.rank << "\n";
    out << "activation = " << to_string(cfg.activation) << "\n";
    out << "head = " << to_string(cfg.resolved_head()) << "\n";
    out << "init_scale = " << fmt(cfg.init_scale) << "\n";
    out << "lora_scale = " << fmt(cfg.lora_scale) << "\n";
    out << "\n[client]\n";
    out << "local_lr = " << fmt(cfg.local_lr) << "\n";
    out << "batch_size = " << cfg.batch_size << "\n";
    out << "\n[tasks]\n";
    out << "clients = " << cfg.universe.clients << "\n";
    out << "clusters = " << cfg.universe.clusters << "\n";
    out << "dim = " << cfg.universe.dim << "\n";
    out << "out_dim = " << cfg.universe.out_dim << "\n";
    out << "family = " << to_string(cfg.universe.family) << "\n";
    out << "intra_spread = " << fmt(cfg.universe.intra_spread) << "\n";
    out << "inter_spread = " << fmt(cfg.universe.inter_spread) << "\n";
    out << "noise_std = " << fmt(cfg.universe.noise_std) << "\n";
    out << "n_train = " << cfg.universe.n_train << "\n";
    out << "n_test = " << cfg.universe.n_test << "\n";
    out << "size_skew = " << fmt(cfg.universe.size_skew) << "\n";
    out << "\n[graph]\n";
    out << "mode = " << to_string(cfg.graph_mode) << "\n";
    out << "density = " << fmt(cfg.graph_density) << "\n";
    out << "similarity_scale = " << fmt(cfg.similarity_scale) << "\n";
    out << "file = " << cfg.graph_file << "\n";
    out << "\n[seeds]\n";
    out << "master = " << cfg.seeds.master << "\n";
    out << "base_weights = " << cfg.seeds.base_weights_seed() << "\n";
    out << "adapter = " << cfg.seeds.adapter_seed() << "\n";
    out << "data = " << cfg.seeds.data_seed() << "\n";
    out << "sampling = " << cfg.seeds.sampling_seed() << "\n";
    out << "graph = " << cfg.seeds.graph_seed() << "\n";
    return out.str();
}

void write_effective_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InvalidConfig("output_dir", "cannot write '" + path + "'");
    out << render_config(cfg);
}

} // namespace mira

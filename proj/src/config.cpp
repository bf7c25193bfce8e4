#include "enzkit/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "enzkit/errors.hpp"
#include "enzkit/rng.hpp"

namespace enzkit {

std::string to_string(Endpoint e) {
    switch (e) {
        case Endpoint::kcat: return "kcat";
        case Endpoint::km: return "km";
        case Endpoint::ki: return "ki";
    }
    return "kcat";
}

std::string to_string(FusionMode m) {
    switch (m) {
        case FusionMode::staged: return "staged";
        case FusionMode::concat_mlp: return "concat_mlp";
        case FusionMode::geometry_first: return "geometry_first";
    }
    return "staged";
}

std::string to_string(TaskLoss t) { return t == TaskLoss::nll ? "nll" : "l2"; }

Endpoint parse_endpoint(const std::string& s) {
    if (s == "kcat") return Endpoint::kcat;
    if (s == "km") return Endpoint::km;
    if (s == "ki") return Endpoint::ki;
    throw ConfigError("unknown endpoint: " + s);
}

FusionMode parse_fusion_mode(const std::string& s) {
    if (s == "staged") return FusionMode::staged;
    if (s == "concat_mlp") return FusionMode::concat_mlp;
    if (s == "geometry_first") return FusionMode::geometry_first;
    throw ConfigError("unknown fusion_mode: " + s);
}

TaskLoss parse_task_loss(const std::string& s) {
    if (s == "nll") return TaskLoss::nll;
    if (s == "l2") return TaskLoss::l2;
    throw ConfigError("unknown task_loss: " + s);
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::uint64_t parse_u64(const KvItem& it) {
    try {
        size_t pos = 0;
        const std::uint64_t v = std::stoull(it.value, &pos);
        if (pos != it.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + it.key + " at line " + std::to_string(it.line) +
                          ": " + it.value);
    }
}

int parse_int(const KvItem& it) {
    const std::uint64_t v = parse_u64(it);
    if (v > 1u << 30) throw ConfigError("value too large for " + it.key);
    return static_cast<int>(v);
}

double parse_double(const KvItem& it) {
    try {
        size_t pos = 0;
        const double v = std::stod(it.value, &pos);
        if (pos != it.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + it.key + " at line " + std::to_string(it.line) +
                          ": " + it.value);
    }
}

bool parse_bool(const KvItem& it) {
    if (it.value == "true" || it.value == "1") return true;
    if (it.value == "false" || it.value == "0") return false;
    throw ConfigError("bad boolean for " + it.key + " at line " + std::to_string(it.line) +
                      ": " + it.value);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<KvItem> parse_kv_text(const std::string& text, const std::string& origin) {
    std::vector<KvItem> items;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key=value, got \"" + t + "\"");
        }
        KvItem item;
        item.key = trim(t.substr(0, eq));
        item.value = trim(t.substr(eq + 1));
        item.line = lineno;
        if (item.key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<KvItem> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_kv_text(buf.str(), path);
}

TrainConfig parse_train_config_text(const std::string& text, const std::string& origin) {
    TrainConfig cfg;
    for (const auto& it : parse_kv_text(text, origin)) {
        if (it.key == "seed") cfg.seed = parse_u64(it);
        else if (it.key == "endpoint") cfg.endpoint = parse_endpoint(it.value);
        else if (it.key == "dim") cfg.dim = parse_int(it);
        else if (it.key == "d_k") cfg.d_k = parse_int(it);
        else if (it.key == "experts") cfg.experts = parse_int(it);
        else if (it.key == "top_k") cfg.top_k = parse_int(it);
        else if (it.key == "expert_rank") cfg.expert_rank = parse_int(it);
        else if (it.key == "lora_rank") cfg.lora_rank = parse_int(it);
        else if (it.key == "lora_scale") cfg.lora_scale = parse_double(it);
        else if (it.key == "lora_dropout") cfg.lora_dropout = parse_double(it);
        else if (it.key == "backbone_layers") cfg.backbone_layers = parse_int(it);
        else if (it.key == "backbone_seed") cfg.backbone_seed = parse_u64(it);
        else if (it.key == "max_seq_len") cfg.max_seq_len = parse_int(it);
        else if (it.key == "batch_size") cfg.batch_size = parse_int(it);
        else if (it.key == "learning_rate") cfg.learning_rate = parse_double(it);
        else if (it.key == "weight_decay") cfg.weight_decay = parse_double(it);
        else if (it.key == "epochs") cfg.epochs = parse_int(it);
        else if (it.key == "lambda_balance") cfg.lambda_balance = parse_double(it);
        else if (it.key == "lambda_align") cfg.lambda_align = parse_double(it);
        else if (it.key == "use_mrca") cfg.use_mrca = parse_bool(it);
        else if (it.key == "use_gmoe") cfg.use_gmoe = parse_bool(it);
        else if (it.key == "moe_geometry") cfg.moe_geometry = parse_bool(it);
        else if (it.key == "use_esda") cfg.use_esda = parse_bool(it);
        else if (it.key == "fusion_mode") cfg.fusion_mode = parse_fusion_mode(it.value);
        else if (it.key == "task_loss") cfg.task_loss = parse_task_loss(it.value);
        else if (it.key == "workers") cfg.workers = parse_int(it);
        else if (it.key == "esda_bandwidth") cfg.esda_bandwidth = parse_double(it);
        else
            throw ConfigError(origin + ":" + std::to_string(it.line) + ": unknown key \"" +
                              it.key + "\"");
    }
    cfg.validate();
    return cfg;
}

TrainConfig parse_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_train_config_text(buf.str(), path);
}

void TrainConfig::validate() const {
    if (dim < 2) throw ConfigError("dim must be >= 2");
    if (dim % 2 != 0) throw ConfigError("dim must be even (head halves it)");
    if (d_k < 0) throw ConfigError("d_k must be >= 0");
    if (experts < 1) throw ConfigError("experts must be >= 1");
    if (top_k < 1 || top_k > experts) throw ConfigError("top_k must be in [1, experts]");
    if (expert_rank < 1) throw ConfigError("expert_rank must be >= 1");
    if (lora_rank < 1) throw ConfigError("lora_rank must be >= 1");
    if (lora_scale <= 0) throw ConfigError("lora_scale must be positive");
    if (lora_dropout < 0 || lora_dropout >= 1) throw ConfigError("lora_dropout must be in [0,1)");
    if (backbone_layers < 1) throw ConfigError("backbone_layers must be >= 1");
    if (max_seq_len < 1) throw ConfigError("max_seq_len must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
    if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (lambda_balance < 0 || lambda_align < 0) throw ConfigError("lambdas must be >= 0");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (esda_bandwidth < 0) throw ConfigError("esda_bandwidth must be >= 0");
}

std::string canonical_config_text(const TrainConfig& cfg) {
    std::ostringstream out;
    out << "seed=" << cfg.seed << "\n";
    out << "endpoint=" << to_string(cfg.endpoint) << "\n";
    out << "dim=" << cfg.dim << "\n";
    out << "d_k=" << cfg.d_k << "\n";
    out << "experts=" << cfg.experts << "\n";
    out << "top_k=" << cfg.top_k << "\n";
    out << "expert_rank=" << cfg.expert_rank << "\n";
    out << "lora_rank=" << cfg.lora_rank << "\n";
    out << "lora_scale=" << fmt_double(cfg.lora_scale) << "\n";
    out << "lora_dropout=" << fmt_double(cfg.lora_dropout) << "\n";
    out << "backbone_layers=" << cfg.backbone_layers << "\n";
    out << "backbone_seed=" << cfg.backbone_seed << "\n";
    out << "max_seq_len=" << cfg.max_seq_len << "\n";
    out << "batch_size=" << cfg.batch_size << "\n";
    out << "learning_rate=" << fmt_double(cfg.learning_rate) << "\n";
    out << "weight_decay=" << fmt_double(cfg.weight_decay) << "\n";
    out << "epochs=" << cfg.epochs << "\n";
    out << "lambda_balance=" << fmt_double(cfg.lambda_balance) << "\n";
    out << "lambda_align=" << fmt_double(cfg.lambda_align) << "\n";
    out << "use_mrca=" << (cfg.use_mrca ? "true" : "false") << "\n";
    out << "use_gmoe=" << (cfg.use_gmoe ? "true" : "false") << "\n";
    out << "moe_geometry=" << (cfg.moe_geometry ? "true" : "false") << "\n";
    out << "use_esda=" << (cfg.use_esda ? "true" : "false") << "\n";
    out << "fusion_mode=" << to_string(cfg.fusion_mode) << "\n";
    out << "task_loss=" << to_string(cfg.task_loss) << "\n";
    // workers is an execution detail: results are worker-count independent by
    // contract, so it does not participate in run identity.
    out << "esda_bandwidth=" << fmt_double(cfg.esda_bandwidth) << "\n";
    return out.str();
}

std::array<std::uint8_t, 32> config_hash(const std::string& text) {
    std::array<std::uint8_t, 32> digest{};
    static constexpr std::uint64_t kBasis[4] = {
        0xcbf29ce484222325ULL, 0x84222325cbf29ce4ULL,
        0x9ce484222325cbf2ULL, 0x2325cbf29ce48422ULL};
    for (int lane = 0; lane < 4; ++lane) {
        std::uint64_t h = kBasis[lane];
        h ^= static_cast<std::uint64_t>(lane + 1) * 0x100000001b3ULL;
        for (unsigned char c : text) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h = splitmix64(h);
        for (int b = 0; b < 8; ++b)
            digest[lane * 8 + b] = static_cast<std::uint8_t>(h >> (8 * b));
    }
    return digest;
}

}  // namespace enzkit

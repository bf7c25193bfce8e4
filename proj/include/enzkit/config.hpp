#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace enzkit {

enum class Endpoint { kcat, km, ki };
enum class FusionMode { staged, concat_mlp, geometry_first };
enum class TaskLoss { nll, l2 };

std::string to_string(Endpoint e);
std::string to_string(FusionMode m);
std::string to_string(TaskLoss t);
Endpoint parse_endpoint(const std::string& s);
FusionMode parse_fusion_mode(const std::string& s);
TaskLoss parse_task_loss(const std::string& s);

/**
 * Run configuration. Desk-scale defaults; the published-scale values
 * (dim=1024, max_seq_len=1024) remain reachable through the same keys.
 */
struct TrainConfig {
    std::uint64_t seed = 1;
    Endpoint endpoint = Endpoint::kcat;

    int dim = 32;          // embedding width D
    int d_k = 0;           // attention projection width; 0 means dim
    int experts = 4;       // n
    int top_k = 2;         // k
    int expert_rank = 2;   // r
    int lora_rank = 8;
    double lora_scale = 16.0;
    double lora_dropout = 0.1;
    int backbone_layers = 2;
    std::uint64_t backbone_seed = 1337;  // frozen encoder draw, shared across runs
    int max_seq_len = 1024;

    int batch_size = 32;
    double learning_rate = 1e-4;
    double weight_decay = 0.01;
    int epochs = 10;
    double lambda_balance = 0.01;  // balancing-loss weight
    double lambda_align = 0.1;     // alignment-loss weight

    bool use_mrca = true;
    bool use_gmoe = true;
    bool moe_geometry = true;  // false = geometry-blind routing and experts
    bool use_esda = true;
    FusionMode fusion_mode = FusionMode::staged;
    TaskLoss task_loss = TaskLoss::nll;
    int workers = 1;
    double esda_bandwidth = 0.0;  // 0 = median heuristic per batch, >0 = fixed

    int attention_dim() const { return d_k > 0 ? d_k : dim; }
    void validate() const;  // throws ConfigError
};

// Flat key=value text; '#' starts a comment line; unknown keys are errors.
TrainConfig parse_train_config(const std::string& path);
TrainConfig parse_train_config_text(const std::string& text, const std::string& origin);

// Fixed key order and %.17g numbers; input to the config hash and the
// checkpoint-embedded copy.
std::string canonical_config_text(const TrainConfig& cfg);

// 32-byte digest (four independent FNV-1a-64 lanes; integrity marker, not
// cryptographic).
std::array<std::uint8_t, 32> config_hash(const std::string& canonical_text);

// Shared low-level parser: returns (key, value, line_number) triples.
struct KvItem {
    std::string key;
    std::string value;
    int line = 0;
};
std::vector<KvItem> parse_kv_text(const std::string& text, const std::string& origin);
std::vector<KvItem> parse_kv_file(const std::string& path);

}  // namespace enzkit

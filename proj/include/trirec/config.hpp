#pragma once

#include <map>
#include <string>

#include "trirec/model.hpp"

namespace trirec::cfg {

// Plain-text configuration: one `key = value` per line, `#` comments,
// blank lines ignored. Values are stored as strings and converted on access.
class ConfigMap {
  public:
    ConfigMap() = default;

    static ConfigMap from_file(const std::string& path);
    static ConfigMap from_string(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Throwing variants for required keys.
    std::string require_string(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

// Populates a ModelConfig from keys: patch_size, d_model, n_layers, n_heads,
// plane_res, plane_channels, decode_hidden, mlp_ratio, input_res, beta_init,
// sdf_bias_init. Missing keys keep the defaults. Validates the result.
model::ModelConfig model_config_from(const ConfigMap& cfg);

}  // namespace trirec::cfg

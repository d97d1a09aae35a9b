#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "objcavit/core/common.hpp"
#include "objcavit/embeddings.hpp"
#include "objcavit/losses.hpp"
#include "objcavit/phrases.hpp"
#include "objcavit/positional.hpp"

namespace objcavit {

// Every architecture/ablation/training knob in one serializable record.
// Each ablation cell (language x positional x object-SA) is one config.
struct ModelConfig {
  // Architecture.
  int embed_dim = 128;   // transformer width; also the dense-feature channels
  int heads = 4;
  int layers = 4;
  int ff_dim = 1024;
  int n_bins = 256;
  int n_kernel_tokens = 16;  // tokens dotted against dense features
  int head_hidden = 256;     // hidden width of the bin-width MLP
  int patch_size = 8;        // patch side in dense-feature pixels

  // Depth range.
  double d_min = 0.001;
  double d_max = 10.0;

  // Ablations.
  LanguageMode language_mode = LanguageMode::kDefOnly;
  PosVariant pos_variant = PosVariant::kPosBboxWh;
  bool object_sa = true;

  // Loss.
  SilogVariant silog_variant = SilogVariant::kAsPrinted;
  double beta = 0.1;

  // Training.
  std::uint64_t seed = 42;
  int batch_size = 4;
  int epochs = 32;
  int max_steps = 500;  // 0 = no cap
  double base_lr = 0.000357;
  double weight_decay = 0.01;

  // Embedding source (ctrl_zeros overrides this with the zeros provider).
  EmbedMode embed_mode = EmbedMode::kMock;
  std::string embed_cache_path;

  // Published-scale preset: 16x16 patches over the half-resolution feature
  // map, 128 kernel tokens, 25 epochs at batch 8. Needs full-size inputs.
  static ModelConfig paper_preset() {
    ModelConfig c;
    c.patch_size = 16;
    c.n_kernel_tokens = 128;
    c.epochs = 25;
    c.batch_size = 8;
    c.max_steps = 0;
    return c;
  }
};

inline std::string to_string(LanguageMode m) {
  switch (m) {
    case LanguageMode::kDefOnly: return "def_only";
    case LanguageMode::kDefSzRel: return "def_sz_rel";
    case LanguageMode::kCtrlZeros: return "ctrl_zeros";
  }
  return "?";
}
inline std::string to_string(PosVariant v) {
  return v == PosVariant::kPos ? "pos" : "pos_bbox_wh";
}
inline std::string to_string(SilogVariant v) {
  return v == SilogVariant::kAsPrinted ? "as_printed" : "variance_form";
}
inline std::string to_string(EmbedMode m) {
  switch (m) {
    case EmbedMode::kMock: return "mock";
    case EmbedMode::kCache: return "cache";
    case EmbedMode::kZeros: return "zeros";
  }
  return "?";
}

inline LanguageMode language_mode_from(const std::string& s) {
  if (s == "def_only") return LanguageMode::kDefOnly;
  if (s == "def_sz_rel") return LanguageMode::kDefSzRel;
  if (s == "ctrl_zeros") return LanguageMode::kCtrlZeros;
  throw parse_error("config: unknown language_mode \"" + s + "\"");
}
inline PosVariant pos_variant_from(const std::string& s) {
  if (s == "pos") return PosVariant::kPos;
  if (s == "pos_bbox_wh") return PosVariant::kPosBboxWh;
  throw parse_error("config: unknown pos_variant \"" + s + "\"");
}
inline SilogVariant silog_variant_from(const std::string& s) {
  if (s == "as_printed") return SilogVariant::kAsPrinted;
  if (s == "variance_form") return SilogVariant::kVarianceForm;
  throw parse_error("config: unknown silog_variant \"" + s + "\"");
}
inline EmbedMode embed_mode_from(const std::string& s) {
  if (s == "mock") return EmbedMode::kMock;
  if (s == "cache") return EmbedMode::kCache;
  if (s == "zeros") return EmbedMode::kZeros;
  throw parse_error("config: unknown embed_mode \"" + s + "\"");
}

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return nlohmann::json{
      {"model",
       {{"embed_dim", c.embed_dim},
        {"heads", c.heads},
        {"layers", c.layers},
        {"ff_dim", c.ff_dim},
        {"n_bins", c.n_bins},
        {"n_kernel_tokens", c.n_kernel_tokens},
        {"head_hidden", c.head_hidden},
        {"patch_size", c.patch_size},
        {"d_min", c.d_min},
        {"d_max", c.d_max}}},
      {"ablation",
       {{"language_mode", to_string(c.language_mode)},
        {"pos_variant", to_string(c.pos_variant)},
        {"object_sa", c.object_sa}}},
      {"loss", {{"silog_variant", to_string(c.silog_variant)}, {"beta", c.beta}}},
      {"train",
       {{"seed", c.seed},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"max_steps", c.max_steps},
        {"base_lr", c.base_lr},
        {"weight_decay", c.weight_decay}}},
      {"embedding", {{"mode", to_string(c.embed_mode)}, {"cache_path", c.embed_cache_path}}}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  auto get = [](const nlohmann::json& obj, const char* key, auto& out) {
    if (obj.contains(key)) out = obj[key].template get<std::decay_t<decltype(out)>>();
  };
  if (j.contains("model")) {
    const auto& m = j["model"];
    get(m, "embed_dim", c.embed_dim);
    get(m, "heads", c.heads);
    get(m, "layers", c.layers);
    get(m, "ff_dim", c.ff_dim);
    get(m, "n_bins", c.n_bins);
    get(m, "n_kernel_tokens", c.n_kernel_tokens);
    get(m, "head_hidden", c.head_hidden);
    get(m, "patch_size", c.patch_size);
    get(m, "d_min", c.d_min);
    get(m, "d_max", c.d_max);
  }
  if (j.contains("ablation")) {
    const auto& a = j["ablation"];
    if (a.contains("language_mode"))
      c.language_mode = language_mode_from(a["language_mode"].get<std::string>());
    if (a.contains("pos_variant"))
      c.pos_variant = pos_variant_from(a["pos_variant"].get<std::string>());
    get(a, "object_sa", c.object_sa);
  }
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    if (l.contains("silog_variant"))
      c.silog_variant = silog_variant_from(l["silog_variant"].get<std::string>());
    get(l, "beta", c.beta);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    get(t, "seed", c.seed);
    get(t, "batch_size", c.batch_size);
    get(t, "epochs", c.epochs);
    get(t, "max_steps", c.max_steps);
    get(t, "base_lr", c.base_lr);
    get(t, "weight_decay", c.weight_decay);
  }
  if (j.contains("embedding")) {
    const auto& e = j["embedding"];
    if (e.contains("mode")) c.embed_mode = embed_mode_from(e["mode"].get<std::string>());
    get(e, "cache_path", c.embed_cache_path);
  }
  return c;
}

inline ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error("config: " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const std::string& path, const ModelConfig& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << config_to_json(c).dump(2) << "\n";
}

}  // namespace objcavit

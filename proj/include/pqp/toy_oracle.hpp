#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pqp/oracle.hpp"

namespace pqp {

/// A linear stand-in for a trained network.
///
///   logits = W * flatten(x) / (255 * sqrt(dim)) + b,   dim = H * W * 3
///
/// Confidence mode returns softmax(logits); feature mode returns the logits,
/// divided by their Euclidean norm when `normalize` is set. `weights` is
/// row-major, `classes` rows of `dim` entries.
struct ToyModelSpec {
  OutputKind mode = OutputKind::confidence;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  bool normalize = false;
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t input_dim() const { return height * width * Image::kChannels; }

  /// Throws std::invalid_argument unless the shapes agree, every value is
  /// finite and classes >= 2.
  void validate() const;
};

/// Generator knobs. The defaults give plain U[-1, 1] weights and bias.
struct ToyGenOptions {
  double weight_scale = 1.0;  ///< weights ~ U[-weight_scale, weight_scale]
  double bias_scale = 1.0;    ///< bias ~ U[-bias_scale, bias_scale]
  /// When > 0, each channel plane of each weight row has its local
  /// (2r+1)x(2r+1) box mean and then its overall mean removed, so the model
  /// ignores flat color and responds mostly to fine detail.
  std::size_t highpass_radius = 0;

  /// Profile under which the attacks studied here succeed at SSIM >= 0.95
  /// on 32x32 scenes: scale 128, radius 1 (bias as given).
  static ToyGenOptions responsive(double bias_scale = 1.0) {
    return {128.0, bias_scale, 1};
  }
};

/// Deterministic: the same arguments always produce the same spec.
ToyModelSpec gen_toy_spec(std::uint64_t seed, std::size_t height, std::size_t width,
                          std::size_t classes, OutputKind mode, bool normalize,
                          const ToyGenOptions& options = {});

/// JSON file: {"mode", "height", "width", "classes", "normalize",
/// "weights": [[...], ...], "bias": [...]}.
ToyModelSpec load_toy_spec(const std::filesystem::path& path);
ToyModelSpec parse_toy_spec(const std::string& json_text);
std::string serialize_toy_spec(const ToyModelSpec& spec);
void save_toy_spec(const ToyModelSpec& spec, const std::filesystem::path& path);

/// Computes the output vector without touching any query meter. Shared by
/// ToyOracle and by test servers that emulate a remote model.
OutputVector evaluate_toy_model(const ToyModelSpec& spec, const Image& x);

class ToyOracle final : public Oracle {
 public:
  explicit ToyOracle(ToyModelSpec spec);

  InputDims input_dims() const override { return {spec_.height, spec_.width}; }
  OutputKind kind() const override { return spec_.mode; }

 protected:
  OutputVector evaluate(const Image& x) override;

 private:
  ToyModelSpec spec_;
};

}  // namespace pqp

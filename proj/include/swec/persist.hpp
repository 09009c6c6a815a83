#ifndef SWEC_PERSIST_HPP
#define SWEC_PERSIST_HPP

// On-disk formats: dataset directories, binary model files.

#include "swec/baselines.hpp"
#include "swec/config.hpp"
#include "swec/synthgrid.hpp"
#include "swec/tinycnn.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>

namespace swec {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// manifest.json content for a dataset: generator settings, grid and per-record specs.
nlohmann::json dataset_manifest(const Dataset& ds);

/// Writes `dir/manifest.json` and `dir/waveforms/evt_<index>.csv`. Values are printed in
/// shortest round-trip form, so loading restores every sample bit for bit.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

void write_waveform_csv(std::ostream& os, const WaveformRecord& record);
/// Parses one waveform CSV into `record.samples`; errors carry source:line.
void read_waveform_csv(std::istream& is, WaveformRecord& record, Eigen::Index expected_rows,
                       const std::string& source);

// Baseline models on energy features also carry the interval count they were fit with.
struct SvmArtifact {
  LinearOvrSvm svm;
  int num_intervals = 8;
};

struct AutoencoderArtifact {
  AutoencoderClassifier classifier;
  int num_intervals = 8;
};

using ModelArtifact = std::variant<CnnModel<double>, SvmArtifact, TaperedMlp, AutoencoderArtifact>;

Method artifact_method(const ModelArtifact& model);

/// Little-endian. CNN: "SWEC", u32 version, six u32 dims (num_filters, fh, fw, input_h,
/// input_w, num_classes), then float64 conv filters, conv biases, fc weights (row-major),
/// fc biases. Baselines: "SWSV" / "SWMP" / "SWAE", u32 version, u32 dim count, u32 dims,
/// float64 tensors.
void write_model(std::ostream& os, const ModelArtifact& model);
/// Throws FormatError naming the byte offset on truncated or inconsistent input.
ModelArtifact read_model(std::istream& is, const std::string& source = "model");

void save_model(const ModelArtifact& model, const std::filesystem::path& path);
ModelArtifact load_model(const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace swec

#endif  // SWEC_PERSIST_HPP

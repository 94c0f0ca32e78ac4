#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "superflow/synth.hpp"
#include "superflow/trainer.hpp"

namespace superflow {

/// Data/serialization failure; the message always names the offending file.
class IoError : public std::runtime_error {
  public:
    IoError(const std::string& what, std::filesystem::path path)
        : std::runtime_error(what + ": " + path.string()), path_(std::move(path)) {}

    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

inline constexpr std::uint32_t kBlobVersion = 1;
inline constexpr std::array<char, 4> kCloudMagic = {'S', 'F', 'P', 'C'};
inline constexpr std::array<char, 4> kImageMagic = {'S', 'F', 'I', 'M'};
inline constexpr std::array<char, 4> kCheckpointMagic = {'S', 'F', 'C', 'K'};

/// Container layout: magic, u32 version, u64 payload length, payload,
/// u32 CRC32 of the payload. Everything little-endian. Writes go through a
/// temp file + rename.
void write_blob(const std::filesystem::path& path, const std::array<char, 4>& magic,
                const std::vector<std::uint8_t>& payload);
std::vector<std::uint8_t> read_blob(const std::filesystem::path& path,
                                    const std::array<char, 4>& magic);

void write_cloud_blob(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_cloud_blob(const std::filesystem::path& path);

void write_image_blob(const std::filesystem::path& path, const SemanticImage& image);
SemanticImage read_image_blob(const std::filesystem::path& path);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<StepRecord>& history);

struct SynthOptions {
    std::uint64_t seed = 0;
    int scenes = 4;
    int classes = kDefaultNumClasses;
    int cameras = 3;
    int beams = 16;
    double hz = 20.0;
};

struct DatasetScene {
    std::uint64_t seed = 0;
    std::vector<double> timestamps;
    std::vector<std::string> cloud_paths;  // relative to the dataset root
    std::vector<std::string> image_paths;
};

struct Dataset {
    int format_version = 1;
    SynthOptions options;
    std::vector<std::string> class_names;
    std::vector<DatasetScene> scenes;
    std::filesystem::path root;
};

/// Fixed palette for the default classes, "class_<k>" beyond it.
std::vector<std::string> class_palette(int num_classes);

/// Synthesizes `options.scenes` scenes, writes keyframe clouds (grid 2..8 s),
/// first-keyframe camera images, and manifest.json. Deterministic: equal
/// options give byte-identical trees.
Dataset write_dataset(const std::filesystem::path& dir, const SynthOptions& options);

/// Parses manifest.json and checksum-verifies every referenced blob.
Dataset load_dataset(const std::filesystem::path& dir);

LidarSpec lidar_from(const SynthOptions& options);
PretrainData pretrain_data_from(const Dataset& dataset);
std::vector<PointCloud> load_scene_clouds(const Dataset& dataset, std::size_t scene_index);

}  // namespace superflow

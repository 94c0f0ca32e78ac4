#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "superflow/io.hpp"
#include "superflow/rng.hpp"

using namespace superflow;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "superflow_io_tests";
    fs::create_directories(dir);
    return dir;
}

PointCloud sample_cloud(std::uint64_t seed, Eigen::Index n, Eigen::Index channels) {
    Rng rng(seed);
    PointCloud cloud;
    cloud.coords.resize(n, 3);
    cloud.feats.resize(n, channels);
    cloud.timestamp = 4.25;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < 3; ++c) cloud.coords(i, c) = rng.normal() * 20.0;
        for (Eigen::Index c = 0; c < channels; ++c) cloud.feats(i, c) = rng.uniform01();
        cloud.labels.push_back(static_cast<std::uint16_t>(rng.uniform_int(6)));
    }
    return cloud;
}

std::vector<char> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
}

void spit(const fs::path& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint trained_checkpoint() {
    TrainConfig config;
    config.seed = 5;
    config.steps = 4;
    config.num_sweeps = 1;
    PretrainData data;
    data.scene_specs = {random_scene_spec(3)};
    LidarSpec lidar;
    lidar.num_beams = 4;
    lidar.azimuth_steps = 45;
    data.lidar = lidar;
    data.rig = camera_rig(2);
    data.keyframe_times = {3.0, 4.0, 5.0};
    return run_pretraining(config, data);
}

bool same_matrix(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("cloud blobs round-trip bitwise") {
    const fs::path path = temp_dir() / "cloud.sfpc";
    const PointCloud cloud = sample_cloud(11, 37, 2);
    write_cloud_blob(path, cloud);
    const PointCloud back = read_cloud_blob(path);
    CHECK(same_matrix(back.coords, cloud.coords));
    CHECK(same_matrix(back.feats, cloud.feats));
    CHECK(back.labels == cloud.labels);
    CHECK(back.timestamp == cloud.timestamp);

    // Writing the same cloud again produces identical bytes.
    const fs::path copy = temp_dir() / "cloud_copy.sfpc";
    write_cloud_blob(copy, cloud);
    CHECK(slurp(path) == slurp(copy));
}

TEST_CASE("image blobs round-trip bitwise") {
    const fs::path path = temp_dir() / "image.sfim";
    SemanticImage img;
    img.height = 5;
    img.width = 7;
    Rng rng(12);
    for (int i = 0; i < 35; ++i)
        img.class_ids.push_back(i % 9 == 0 ? kSkyClass
                                           : static_cast<std::uint16_t>(rng.uniform_int(6)));
    write_image_blob(path, img);
    const SemanticImage back = read_image_blob(path);
    CHECK(back.height == img.height);
    CHECK(back.width == img.width);
    CHECK(back.class_ids == img.class_ids);
}

TEST_CASE("every single-byte corruption of a cloud blob is detected") {
    const fs::path path = temp_dir() / "corrupt_probe.sfpc";
    write_cloud_blob(path, sample_cloud(13, 6, 1));
    const std::vector<char> original = slurp(path);
    REQUIRE(original.size() > 20);
    int detected = 0;
    for (std::size_t i = 0; i < original.size(); ++i) {
        std::vector<char> mutated = original;
        mutated[i] = static_cast<char>(mutated[i] ^ 0x2d);
        spit(path, mutated);
        try {
            (void)read_cloud_blob(path);
        } catch (const IoError&) {
            ++detected;
        }
    }
    CHECK(detected == static_cast<int>(original.size()));
}

TEST_CASE("blob readers reject the wrong magic, truncation, and absence") {
    const fs::path cloud_path = temp_dir() / "magic.sfpc";
    write_cloud_blob(cloud_path, sample_cloud(14, 4, 1));
    CHECK_THROWS_AS((void)read_image_blob(cloud_path), IoError);

    const std::vector<char> original = slurp(cloud_path);
    const fs::path cut_path = temp_dir() / "cut.sfpc";
    spit(cut_path, std::vector<char>(original.begin(), original.end() - 7));
    CHECK_THROWS_AS((void)read_cloud_blob(cut_path), IoError);
    spit(cut_path, std::vector<char>(original.begin(), original.begin() + 10));
    CHECK_THROWS_AS((void)read_cloud_blob(cut_path), IoError);

    CHECK_THROWS_AS((void)read_cloud_blob(temp_dir() / "missing.sfpc"), IoError);
    try {
        (void)read_cloud_blob(temp_dir() / "missing.sfpc");
    } catch (const IoError& err) {
        CHECK(std::string(err.what()).find("missing.sfpc") != std::string::npos);
    }
}

TEST_CASE("appending trailing bytes is rejected") {
    const fs::path path = temp_dir() / "padded.sfpc";
    write_cloud_blob(path, sample_cloud(15, 4, 1));
    std::vector<char> padded = slurp(path);
    padded.push_back(0);
    spit(path, padded);
    CHECK_THROWS_AS((void)read_cloud_blob(path), IoError);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    const fs::path path = temp_dir() / "state.sfck";
    const Checkpoint state = trained_checkpoint();
    REQUIRE(state.history.size() == 4);
    write_checkpoint(path, state);
    const Checkpoint back = read_checkpoint(path);

    CHECK(back.config == state.config);
    CHECK(back.step == state.step);
    CHECK(same_matrix(back.model.encoder.w1, state.model.encoder.w1));
    CHECK((back.model.encoder.b1.array() == state.model.encoder.b1.array()).all());
    CHECK(same_matrix(back.model.encoder.w2, state.model.encoder.w2));
    CHECK((back.model.encoder.b2.array() == state.model.encoder.b2.array()).all());
    CHECK(same_matrix(back.model.head_point.weight, state.model.head_point.weight));
    CHECK(same_matrix(back.model.head_image.weight, state.model.head_image.weight));
    CHECK(same_matrix(back.model.image_table, state.model.image_table));
    CHECK(back.opt.t == state.opt.t);
    CHECK(same_matrix(back.opt.m_w1, state.opt.m_w1));
    CHECK(same_matrix(back.opt.v_w1, state.opt.v_w1));
    CHECK((back.opt.m_b2.array() == state.opt.m_b2.array()).all());
    CHECK(same_matrix(back.opt.v_head_image, state.opt.v_head_image));
    REQUIRE(back.history.size() == state.history.size());
    for (std::size_t i = 0; i < back.history.size(); ++i) {
        CHECK(back.history[i].step == state.history[i].step);
        CHECK(back.history[i].lr == state.history[i].lr);
        CHECK(back.history[i].l_sc == state.history[i].l_sc);
        CHECK(back.history[i].l_tc == state.history[i].l_tc);
        CHECK(back.history[i].l_d2s == state.history[i].l_d2s);
        CHECK(back.history[i].total == state.history[i].total);
        CHECK(back.history[i].skipped == state.history[i].skipped);
    }

    // Rewriting the reloaded state gives the same bytes.
    const fs::path again = temp_dir() / "state_again.sfck";
    write_checkpoint(again, back);
    CHECK(slurp(path) == slurp(again));

    std::vector<char> mutated = slurp(path);
    mutated[mutated.size() / 2] = static_cast<char>(mutated[mutated.size() / 2] ^ 1);
    spit(path, mutated);
    CHECK_THROWS_AS((void)read_checkpoint(path), IoError);
}

TEST_CASE("metrics csv has a header and one row per record") {
    const fs::path path = temp_dir() / "metrics.csv";
    std::vector<StepRecord> history(3);
    history[0] = {0, 4e-4, 1.5, 0.25, 0.125, 1.875, false};
    history[1] = {1, 6e-4, 1.25, 0.5, 0.0625, 1.8125, false};
    history[2] = {2, 8e-4, 0.0, 0.0, 0.0, 0.0, true};
    write_metrics_csv(path, history);

    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "step,lr,L_sc,L_tc,L_d2s,total");
    int rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 3);

    // Exact decimal values survive the round-trip formatting.
    std::ifstream again(path);
    std::getline(again, line);
    std::getline(again, line);
    CHECK(line.substr(0, 2) == "0,");
    CHECK(line.find("1.5") != std::string::npos);
}

TEST_CASE("class palette names the default classes then falls back") {
    const auto names = class_palette(8);
    REQUIRE(names.size() == 8);
    CHECK(names[0] == "ground");
    CHECK(names[1] == "building");
    CHECK(names[2] == "vehicle");
    CHECK(names[3] == "pedestrian");
    CHECK(names[4] == "vegetation");
    CHECK(names[5] == "barrier");
    CHECK(names[6] == "class_6");
    CHECK(names[7] == "class_7");
}

TEST_CASE("dataset write/load round-trip") {
    const fs::path dir = temp_dir() / "dataset";
    fs::remove_all(dir);
    SynthOptions options;
    options.seed = 17;
    options.scenes = 2;
    options.cameras = 2;
    options.beams = 4;
    const Dataset written = write_dataset(dir, options);
    REQUIRE(fs::exists(dir / "manifest.json"));
    CHECK(written.scenes.size() == 2);

    const Dataset loaded = load_dataset(dir);
    CHECK(loaded.format_version == 1);
    CHECK(loaded.options.seed == options.seed);
    CHECK(loaded.options.scenes == options.scenes);
    CHECK(loaded.options.classes == options.classes);
    CHECK(loaded.options.cameras == options.cameras);
    CHECK(loaded.options.beams == options.beams);
    CHECK(loaded.options.hz == options.hz);
    CHECK(loaded.class_names == class_palette(options.classes));
    REQUIRE(loaded.scenes.size() == written.scenes.size());
    for (std::size_t s = 0; s < loaded.scenes.size(); ++s) {
        CHECK(loaded.scenes[s].seed == written.scenes[s].seed);
        CHECK(loaded.scenes[s].timestamps == written.scenes[s].timestamps);
        CHECK(loaded.scenes[s].cloud_paths == written.scenes[s].cloud_paths);
        CHECK(loaded.scenes[s].image_paths == written.scenes[s].image_paths);
    }
    CHECK(loaded.scenes[0].timestamps.size() == 7);  // keyframe grid 2..8 s
    CHECK(loaded.scenes[0].image_paths.size() == 2);

    // The clouds referenced by the manifest parse and carry points.
    const auto clouds = load_scene_clouds(loaded, 0);
    REQUIRE(clouds.size() == 7);
    CHECK(clouds[0].size() > 0);
    CHECK(clouds[0].timestamp == loaded.scenes[0].timestamps[0]);

    // Derived pretraining data mirrors the manifest.
    const PretrainData data = pretrain_data_from(loaded);
    CHECK(data.scene_specs.size() == 2);
    CHECK(data.rig.size() == 2);
    CHECK(data.lidar.num_beams == 4);
    CHECK(data.keyframe_times == loaded.scenes[0].timestamps);
    CHECK(data.num_classes == options.classes);
}

TEST_CASE("dataset synthesis is deterministic") {
    const fs::path dir_a = temp_dir() / "dataset_a";
    const fs::path dir_b = temp_dir() / "dataset_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    SynthOptions options;
    options.seed = 23;
    options.scenes = 1;
    options.cameras = 1;
    options.beams = 4;
    write_dataset(dir_a, options);
    write_dataset(dir_b, options);
    for (const auto& entry : fs::recursive_directory_iterator(dir_a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path relative = fs::relative(entry.path(), dir_a);
        CHECK(slurp(entry.path()) == slurp(dir_b / relative));
    }
}

TEST_CASE("load_dataset verifies every blob checksum") {
    const fs::path dir = temp_dir() / "dataset_corrupt";
    fs::remove_all(dir);
    SynthOptions options;
    options.seed = 29;
    options.scenes = 1;
    options.cameras = 1;
    options.beams = 4;
    const Dataset written = write_dataset(dir, options);
    const fs::path victim = dir / written.scenes[0].cloud_paths[3];
    std::vector<char> bytes = slurp(victim);
    bytes[bytes.size() - 9] = static_cast<char>(bytes[bytes.size() - 9] ^ 0x40);
    spit(victim, bytes);
    CHECK_THROWS_AS((void)load_dataset(dir), IoError);
    try {
        (void)load_dataset(dir);
    } catch (const IoError& err) {
        CHECK(std::string(err.what()).find(victim.filename().string()) != std::string::npos);
    }
}

TEST_CASE("load_dataset rejects malformed manifests") {
    const fs::path dir = temp_dir() / "dataset_badmanifest";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "manifest.json");
        out << "{ not json";
    }
    CHECK_THROWS_AS((void)load_dataset(dir), IoError);
    {
        std::ofstream out(dir / "manifest.json", std::ios::trunc);
        out << "{\"format_version\": 1}";
    }
    CHECK_THROWS_AS((void)load_dataset(dir), IoError);
    CHECK_THROWS_AS((void)load_dataset(temp_dir() / "no_such_dataset"), IoError);
}

TEST_CASE("write_dataset validates its options") {
    SynthOptions bad;
    bad.scenes = 0;
    CHECK_THROWS_AS(write_dataset(temp_dir() / "x", bad), std::invalid_argument);
    bad = SynthOptions{};
    bad.classes = 1;
    CHECK_THROWS_AS(write_dataset(temp_dir() / "x", bad), std::invalid_argument);
    bad = SynthOptions{};
    bad.cameras = 0;
    CHECK_THROWS_AS(write_dataset(temp_dir() / "x", bad), std::invalid_argument);
    bad = SynthOptions{};
    bad.hz = 0.0;
    CHECK_THROWS_AS(write_dataset(temp_dir() / "x", bad), std::invalid_argument);
}

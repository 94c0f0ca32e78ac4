#include "superflow/io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "superflow/rng.hpp"

namespace superflow {

namespace {

class ByteWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { append(v, 2); }
    void u32(std::uint32_t v) { append(v, 4); }
    void u64(std::uint64_t v) { append(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void matrix(const Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
    void vector(const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }

    std::vector<std::uint8_t> take() { return std::move(buf_); }

  private:
    void append(std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
  public:
    explicit ByteReader(const std::vector<std::uint8_t>& data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(take(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
    std::uint64_t u64() { return take(8); }
    double f64() { return std::bit_cast<double>(u64()); }

    Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
        Matrix m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
        return m;
    }
    Vector vector(Eigen::Index n) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = f64();
        return v;
    }

    bool done() const { return pos_ == data_.size(); }

  private:
    std::uint64_t take(int bytes) {
        if (pos_ + static_cast<std::size_t>(bytes) > data_.size())
            throw std::length_error("truncated payload");
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i)
            v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }
    const std::vector<std::uint8_t>& data_;
    std::size_t pos_ = 0;
};

std::uint32_t payload_crc(const std::vector<std::uint8_t>& payload) {
    uLong crc = crc32(0L, Z_NULL, 0);
    if (!payload.empty()) crc = crc32_z(crc, payload.data(), payload.size());
    return static_cast<std::uint32_t>(crc);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing", path);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("write failed", path);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed (" + ec.message() + ")", path);
}

std::string format_double(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

}  // namespace

void write_blob(const std::filesystem::path& path, const std::array<char, 4>& magic,
                const std::vector<std::uint8_t>& payload) {
    ByteWriter tail;
    tail.u32(kBlobVersion);
    tail.u64(payload.size());
    const std::vector<std::uint8_t> header = tail.take();

    std::string bytes;
    bytes.reserve(20 + payload.size());
    bytes.append(magic.data(), 4);
    bytes.append(reinterpret_cast<const char*>(header.data()), header.size());
    bytes.append(reinterpret_cast<const char*>(payload.data()), payload.size());
    ByteWriter crc;
    crc.u32(payload_crc(payload));
    const std::vector<std::uint8_t> crc_bytes = crc.take();
    bytes.append(reinterpret_cast<const char*>(crc_bytes.data()), crc_bytes.size());
    write_file_atomic(path, bytes);
}

std::vector<std::uint8_t> read_blob(const std::filesystem::path& path,
                                    const std::array<char, 4>& magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open", path);
    std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (file.size() < 20) throw IoError("truncated blob", path);
    if (std::memcmp(file.data(), magic.data(), 4) != 0) throw IoError("magic mismatch", path);

    std::uint32_t version = 0;
    std::uint64_t length = 0;
    for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(file[4 + i]) << (8 * i);
    for (int i = 0; i < 8; ++i) length |= static_cast<std::uint64_t>(file[8 + i]) << (8 * i);
    if (version != kBlobVersion) throw IoError("unsupported blob version", path);
    if (file.size() != 20 + length) throw IoError("length mismatch", path);

    std::vector<std::uint8_t> payload(file.begin() + 16,
                                      file.begin() + 16 + static_cast<std::ptrdiff_t>(length));
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<std::uint32_t>(file[16 + length + static_cast<std::size_t>(i)])
                  << (8 * i);
    if (stored != payload_crc(payload)) throw IoError("checksum mismatch", path);
    return payload;
}

void write_cloud_blob(const std::filesystem::path& path, const PointCloud& cloud) {
    const Eigen::Index n = cloud.size();
    if (cloud.feats.rows() != n || static_cast<Eigen::Index>(cloud.labels.size()) != n)
        throw std::invalid_argument("cloud arrays disagree in length");
    ByteWriter w;
    w.u64(static_cast<std::uint64_t>(n));
    w.u32(static_cast<std::uint32_t>(cloud.num_channels()));
    w.matrix(cloud.coords);
    w.matrix(cloud.feats);
    for (const std::uint16_t label : cloud.labels) w.u16(label);
    w.f64(cloud.timestamp);
    write_blob(path, kCloudMagic, w.take());
}

PointCloud read_cloud_blob(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> payload = read_blob(path, kCloudMagic);
    try {
        ByteReader r(payload);
        const std::uint64_t n = r.u64();
        const std::uint32_t c = r.u32();
        if (n > (1ULL << 28) || c > 4096) throw std::length_error("implausible shape");
        const std::uint64_t expected = 8 + 4 + n * 24 + n * c * 8 + n * 2 + 8;
        if (payload.size() != expected) throw std::length_error("length mismatch");
        PointCloud cloud;
        cloud.coords = r.matrix(static_cast<Eigen::Index>(n), 3);
        cloud.feats = r.matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
        cloud.labels.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) cloud.labels.push_back(r.u16());
        cloud.timestamp = r.f64();
        if (!r.done()) throw std::length_error("trailing bytes");
        return cloud;
    } catch (const std::length_error&) {
        throw IoError("malformed cloud payload", path);
    }
}

void write_image_blob(const std::filesystem::path& path, const SemanticImage& image) {
    if (image.class_ids.size() !=
        static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width))
        throw std::invalid_argument("image grid disagrees with its shape");
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(image.height));
    w.u32(static_cast<std::uint32_t>(image.width));
    for (const std::uint16_t id : image.class_ids) w.u16(id);
    write_blob(path, kImageMagic, w.take());
}

SemanticImage read_image_blob(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> payload = read_blob(path, kImageMagic);
    try {
        ByteReader r(payload);
        const std::uint32_t h = r.u32();
        const std::uint32_t w = r.u32();
        if (h > 1 << 16 || w > 1 << 16) throw std::length_error("implausible shape");
        const std::uint64_t pixels = static_cast<std::uint64_t>(h) * w;
        if (payload.size() != 8 + pixels * 2) throw std::length_error("length mismatch");
        SemanticImage image;
        image.height = static_cast<int>(h);
        image.width = static_cast<int>(w);
        image.class_ids.reserve(pixels);
        for (std::uint64_t p = 0; p < pixels; ++p) image.class_ids.push_back(r.u16());
        if (!r.done()) throw std::length_error("trailing bytes");
        return image;
    } catch (const std::length_error&) {
        throw IoError("malformed image payload", path);
    }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const TrainConfig& c = checkpoint.config;
    const TrainerModel& m = checkpoint.model;
    ByteWriter w;
    w.u64(c.seed);
    w.u64(c.steps);
    w.u64(c.scenes_per_epoch);
    w.f64(c.dt);
    w.u32(static_cast<std::uint32_t>(c.num_sweeps));
    w.f64(c.tau);
    w.f64(c.w_sc);
    w.f64(c.w_tc);
    w.f64(c.w_d2s);
    w.f64(c.base_lr);
    w.u8(c.enable_vc ? 1 : 0);
    w.u8(c.enable_d2s ? 1 : 0);
    w.u8(c.enable_fcl ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(c.hidden_dim));
    w.u32(static_cast<std::uint32_t>(c.point_dim));
    w.u32(static_cast<std::uint32_t>(c.embed_dim));
    w.u32(static_cast<std::uint32_t>(c.head_dim));
    w.u32(static_cast<std::uint32_t>(m.image_table.rows()));
    w.u32(static_cast<std::uint32_t>(m.encoder.w1.cols() - 3));
    w.u64(checkpoint.step);
    w.u64(checkpoint.opt.t);
    w.matrix(m.encoder.w1);
    w.vector(m.encoder.b1);
    w.matrix(m.encoder.w2);
    w.vector(m.encoder.b2);
    w.matrix(m.head_point.weight);
    w.matrix(m.head_image.weight);
    w.matrix(m.image_table);
    const OptimizerState& o = checkpoint.opt;
    w.matrix(o.m_w1);
    w.matrix(o.v_w1);
    w.vector(o.m_b1);
    w.vector(o.v_b1);
    w.matrix(o.m_w2);
    w.matrix(o.v_w2);
    w.vector(o.m_b2);
    w.vector(o.v_b2);
    w.matrix(o.m_head_point);
    w.matrix(o.v_head_point);
    w.matrix(o.m_head_image);
    w.matrix(o.v_head_image);
    w.u64(checkpoint.history.size());
    for (const StepRecord& rec : checkpoint.history) {
        w.u64(rec.step);
        w.f64(rec.lr);
        w.f64(rec.l_sc);
        w.f64(rec.l_tc);
        w.f64(rec.l_d2s);
        w.f64(rec.total);
        w.u8(rec.skipped ? 1 : 0);
    }
    write_blob(path, kCheckpointMagic, w.take());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> payload = read_blob(path, kCheckpointMagic);
    try {
        ByteReader r(payload);
        Checkpoint ckpt;
        TrainConfig& c = ckpt.config;
        c.seed = r.u64();
        c.steps = r.u64();
        c.scenes_per_epoch = r.u64();
        c.dt = r.f64();
        c.num_sweeps = static_cast<int>(r.u32());
        c.tau = r.f64();
        c.w_sc = r.f64();
        c.w_tc = r.f64();
        c.w_d2s = r.f64();
        c.base_lr = r.f64();
        c.enable_vc = r.u8() != 0;
        c.enable_d2s = r.u8() != 0;
        c.enable_fcl = r.u8() != 0;
        c.hidden_dim = static_cast<int>(r.u32());
        c.point_dim = static_cast<int>(r.u32());
        c.embed_dim = static_cast<int>(r.u32());
        c.head_dim = static_cast<int>(r.u32());
        const std::uint32_t num_classes = r.u32();
        const std::uint32_t feat_channels = r.u32();
        if (c.hidden_dim < 1 || c.point_dim < 1 || c.embed_dim < 1 || c.head_dim < 1 ||
            num_classes < 1 || c.hidden_dim > 65536 || num_classes > 65536 ||
            feat_channels > 4096)
            throw std::length_error("implausible shape");
        ckpt.step = r.u64();
        ckpt.opt.t = r.u64();
        TrainerModel& m = ckpt.model;
        m.encoder.w1 = r.matrix(c.hidden_dim, 3 + static_cast<Eigen::Index>(feat_channels));
        m.encoder.b1 = r.vector(c.hidden_dim);
        m.encoder.w2 = r.matrix(c.point_dim, c.hidden_dim);
        m.encoder.b2 = r.vector(c.point_dim);
        m.head_point.weight = r.matrix(c.head_dim, c.point_dim);
        m.head_image.weight = r.matrix(c.head_dim, c.embed_dim);
        m.image_table = r.matrix(num_classes, c.embed_dim);
        OptimizerState& o = ckpt.opt;
        o.m_w1 = r.matrix(c.hidden_dim, 3 + static_cast<Eigen::Index>(feat_channels));
        o.v_w1 = r.matrix(c.hidden_dim, 3 + static_cast<Eigen::Index>(feat_channels));
        o.m_b1 = r.vector(c.hidden_dim);
        o.v_b1 = r.vector(c.hidden_dim);
        o.m_w2 = r.matrix(c.point_dim, c.hidden_dim);
        o.v_w2 = r.matrix(c.point_dim, c.hidden_dim);
        o.m_b2 = r.vector(c.point_dim);
        o.v_b2 = r.vector(c.point_dim);
        o.m_head_point = r.matrix(c.head_dim, c.point_dim);
        o.v_head_point = r.matrix(c.head_dim, c.point_dim);
        o.m_head_image = r.matrix(c.head_dim, c.embed_dim);
        o.v_head_image = r.matrix(c.head_dim, c.embed_dim);
        const std::uint64_t entries = r.u64();
        if (entries > (1ULL << 32)) throw std::length_error("implausible history");
        ckpt.history.reserve(entries);
        for (std::uint64_t i = 0; i < entries; ++i) {
            StepRecord rec;
            rec.step = r.u64();
            rec.lr = r.f64();
            rec.l_sc = r.f64();
            rec.l_tc = r.f64();
            rec.l_d2s = r.f64();
            rec.total = r.f64();
            rec.skipped = r.u8() != 0;
            ckpt.history.push_back(rec);
        }
        if (!r.done()) throw std::length_error("trailing bytes");
        return ckpt;
    } catch (const std::length_error&) {
        throw IoError("malformed checkpoint payload", path);
    }
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<StepRecord>& history) {
    std::ostringstream out;
    out << "step,lr,L_sc,L_tc,L_d2s,total\n";
    for (const StepRecord& rec : history) {
        out << rec.step << ',' << format_double(rec.lr) << ',' << format_double(rec.l_sc) << ','
            << format_double(rec.l_tc) << ',' << format_double(rec.l_d2s) << ','
            << format_double(rec.total) << '\n';
    }
    write_file_atomic(path, out.str());
}

std::vector<std::string> class_palette(int num_classes) {
    static const std::vector<std::string> base = {"ground",     "building",   "vehicle",
                                                  "pedestrian", "vegetation", "barrier"};
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        if (static_cast<std::size_t>(c) < base.size())
            names.push_back(base[static_cast<std::size_t>(c)]);
        else
            names.push_back("class_" + std::to_string(c));
    }
    return names;
}

LidarSpec lidar_from(const SynthOptions& options) {
    LidarSpec lidar;
    lidar.num_beams = options.beams;
    lidar.sweep_hz = options.hz;
    return lidar;
}

namespace {

std::string zero_pad(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

Dataset write_dataset(const std::filesystem::path& dir, const SynthOptions& options) {
    if (options.scenes < 1) throw std::invalid_argument("need at least one scene");
    if (options.classes < 2) throw std::invalid_argument("need at least two classes");
    if (options.cameras < 1) throw std::invalid_argument("need at least one camera");
    if (options.beams < 1) throw std::invalid_argument("need at least one beam");
    if (options.hz <= 0.0) throw std::invalid_argument("sweep rate must be positive");
    std::filesystem::create_directories(dir);

    Dataset ds;
    ds.format_version = 1;
    ds.options = options;
    ds.class_names = class_palette(options.classes);
    ds.root = dir;
    const LidarSpec lidar = lidar_from(options);
    const std::vector<CameraCalibration> rig = camera_rig(options.cameras);
    const std::vector<double> grid = {2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};

    for (int i = 0; i < options.scenes; ++i) {
        const std::uint64_t scene_seed = mix_seed(options.seed, static_cast<std::uint64_t>(i));
        const Scene scene = generate_scene(random_scene_spec(scene_seed, options.classes));
        const std::string scene_dir = "scene_" + zero_pad(i, 3);
        std::filesystem::create_directories(dir / scene_dir);

        DatasetScene entry;
        entry.seed = scene_seed;
        entry.timestamps = grid;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const double t = grid[j];
            const PointCloud cloud = scan_lidar(scene, scene.ego_pose(t), t, lidar);
            const std::string rel =
                scene_dir + "/cloud_" + zero_pad(static_cast<int>(j), 2) + ".sfpc";
            write_cloud_blob(dir / rel, cloud);
            entry.cloud_paths.push_back(rel);
        }
        const std::vector<SemanticImage> images =
            render_semantic_images(scene, scene.ego_pose(grid[0]), grid[0], rig);
        for (std::size_t cam = 0; cam < images.size(); ++cam) {
            const std::string rel =
                scene_dir + "/image_00_cam" + std::to_string(cam) + ".sfim";
            write_image_blob(dir / rel, images[cam]);
            entry.image_paths.push_back(rel);
        }
        ds.scenes.push_back(std::move(entry));
    }

    nlohmann::json manifest;
    manifest["format_version"] = ds.format_version;
    manifest["scene_count"] = static_cast<int>(ds.scenes.size());
    manifest["generator"] = {{"seed", options.seed},     {"classes", options.classes},
                             {"cameras", options.cameras}, {"beams", options.beams},
                             {"hz", options.hz}};
    nlohmann::json scenes = nlohmann::json::array();
    for (const DatasetScene& entry : ds.scenes) {
        nlohmann::json s;
        s["seed"] = entry.seed;
        s["class_names"] = ds.class_names;
        s["camera_count"] = options.cameras;
        s["timestamps"] = entry.timestamps;
        s["clouds"] = entry.cloud_paths;
        s["images"] = entry.image_paths;
        scenes.push_back(std::move(s));
    }
    manifest["scenes"] = std::move(scenes);
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    return ds;
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const std::filesystem::path manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest", manifest_path);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception&) {
        throw IoError("malformed manifest", manifest_path);
    }

    Dataset ds;
    ds.root = dir;
    try {
        ds.format_version = manifest.at("format_version").get<int>();
        if (ds.format_version != 1) throw IoError("unsupported manifest version", manifest_path);
        const auto& gen = manifest.at("generator");
        ds.options.seed = gen.at("seed").get<std::uint64_t>();
        ds.options.classes = gen.at("classes").get<int>();
        ds.options.cameras = gen.at("cameras").get<int>();
        ds.options.beams = gen.at("beams").get<int>();
        ds.options.hz = gen.at("hz").get<double>();
        ds.options.scenes = manifest.at("scene_count").get<int>();
        for (const auto& s : manifest.at("scenes")) {
            DatasetScene entry;
            entry.seed = s.at("seed").get<std::uint64_t>();
            entry.timestamps = s.at("timestamps").get<std::vector<double>>();
            entry.cloud_paths = s.at("clouds").get<std::vector<std::string>>();
            entry.image_paths = s.at("images").get<std::vector<std::string>>();
            if (ds.class_names.empty())
                ds.class_names = s.at("class_names").get<std::vector<std::string>>();
            ds.scenes.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception&) {
        throw IoError("manifest missing required fields", manifest_path);
    }
    if (static_cast<int>(ds.scenes.size()) != ds.options.scenes)
        throw IoError("scene count disagrees with manifest", manifest_path);

    for (const DatasetScene& entry : ds.scenes) {
        for (const std::string& rel : entry.cloud_paths) read_cloud_blob(dir / rel);
        for (const std::string& rel : entry.image_paths) read_image_blob(dir / rel);
    }
    return ds;
}

PretrainData pretrain_data_from(const Dataset& dataset) {
    PretrainData data;
    data.lidar = lidar_from(dataset.options);
    data.rig = camera_rig(dataset.options.cameras);
    data.num_classes = dataset.options.classes;
    data.feat_channels = 1;
    for (const DatasetScene& scene : dataset.scenes) {
        data.scene_specs.push_back(random_scene_spec(scene.seed, dataset.options.classes));
        if (data.keyframe_times.empty()) data.keyframe_times = scene.timestamps;
    }
    return data;
}

std::vector<PointCloud> load_scene_clouds(const Dataset& dataset, std::size_t scene_index) {
    if (scene_index >= dataset.scenes.size()) throw std::out_of_range("scene index out of range");
    std::vector<PointCloud> clouds;
    for (const std::string& rel : dataset.scenes[scene_index].cloud_paths)
        clouds.push_back(read_cloud_blob(dataset.root / rel));
    return clouds;
}

}  // namespace superflow

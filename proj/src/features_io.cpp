#include "countvqa/features_io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>
#include <zlib.h>

namespace cvqa {

namespace {

constexpr char kMagic[8] = {'I', 'R', 'L', 'C', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}

void put_f32(std::string& buf, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(buf, u);
}

class Reader {
public:
    Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32() {
        std::uint32_t u = u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }

private:
    void need(std::size_t n) {
        if (pos_ + n > buf_.size())
            throw std::runtime_error(path_ + ": truncated feature container");
    }

    const std::string& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_features(const std::vector<SceneRecord>& scenes, const std::string& path) {
    std::string buf;
    buf.append(kMagic, 8);
    put_u32(buf, kVersion);
    for (const SceneRecord& s : scenes) {
        put_u32(buf, static_cast<std::uint32_t>(s.image_id.size()));
        buf.append(s.image_id);
        std::uint32_t n = static_cast<std::uint32_t>(s.object_count());
        std::uint32_t d = static_cast<std::uint32_t>(s.feature_dim());
        put_u32(buf, n);
        put_u32(buf, d);
        put_f32(buf, static_cast<float>(s.width));
        put_f32(buf, static_cast<float>(s.height));
        for (const Box& b : s.boxes) {
            put_f32(buf, static_cast<float>(b.x1));
            put_f32(buf, static_cast<float>(b.y1));
            put_f32(buf, static_cast<float>(b.x2));
            put_f32(buf, static_cast<float>(b.y2));
        }
        for (std::uint32_t i = 0; i < n; ++i)
            for (std::uint32_t j = 0; j < d; ++j)
                put_f32(buf, static_cast<float>(s.features.at(i, j)));
    }
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    put_u32(buf, crc);

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write feature container " + path);
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<SceneRecord> read_features(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open feature container " + path);
    std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 8) != 0)
        throw std::runtime_error(path + ": not a feature container");

    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= static_cast<std::uint32_t>(
                          static_cast<unsigned char>(buf[buf.size() - 4 + static_cast<std::size_t>(i)]))
                      << (8 * i);
    std::uint32_t crc = static_cast<std::uint32_t>(crc32(
        0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    if (crc != stored_crc) throw std::runtime_error(path + ": CRC mismatch");

    Reader r(buf, path);
    r.seek(8);
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw std::runtime_error(path + ": unsupported container version " +
                                 std::to_string(version));

    std::vector<SceneRecord> scenes;
    std::size_t end = buf.size() - 4;
    while (r.pos() < end) {
        SceneRecord s;
        std::uint32_t id_len = r.u32();
        s.image_id = r.bytes(id_len);
        std::uint32_t n = r.u32();
        std::uint32_t d = r.u32();
        s.width = r.f32();
        s.height = r.f32();
        s.boxes.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            Box b;
            b.x1 = r.f32();
            b.y1 = r.f32();
            b.x2 = r.f32();
            b.y2 = r.f32();
            s.boxes.push_back(b);
        }
        s.features = Tensor({n, d});
        for (std::uint32_t i = 0; i < n; ++i)
            for (std::uint32_t j = 0; j < d; ++j) s.features.at(i, j) = r.f32();
        if (!s.features.all_finite())
            throw std::runtime_error(path + ": non-finite features for image " + s.image_id);
        if (r.pos() > end) throw std::runtime_error(path + ": record overruns CRC trailer");
        scenes.push_back(std::move(s));
    }
    return scenes;
}

void write_labels(const std::vector<SceneRecord>& scenes,
                  const std::vector<std::string>& categories, const std::string& path) {
    nlohmann::json j;
    j["categories"] = categories;
    auto& images = j["images"];
    images = nlohmann::json::array();
    for (const SceneRecord& s : scenes) {
        nlohmann::json img;
        img["image_id"] = s.image_id;
        img["proposal_labels"] = s.proposal_labels;
        auto& gt = img["gt"];
        gt = nlohmann::json::array();
        for (const GtObject& o : s.gt_objects)
            gt.push_back({{"category", o.category},
                          {"box", {o.box.x1, o.box.y1, o.box.x2, o.box.y2}}});
        images.push_back(std::move(img));
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write labels " + path);
    os << j.dump(2) << "\n";
}

LabelFile read_labels(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open labels " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    LabelFile out;
    out.categories = j.at("categories").get<std::vector<std::string>>();
    for (const auto& img : j.at("images")) {
        auto& entry = out.by_image[img.at("image_id").get<std::string>()];
        entry.first = img.at("proposal_labels").get<std::vector<int>>();
        for (const auto& o : img.at("gt")) {
            GtObject g;
            g.category = o.at("category").get<int>();
            auto b = o.at("box");
            g.box = Box{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                        b.at(3).get<double>()};
            entry.second.push_back(g);
        }
    }
    return out;
}

void apply_labels(const LabelFile& labels, std::vector<SceneRecord>& scenes) {
    for (SceneRecord& s : scenes) {
        auto it = labels.by_image.find(s.image_id);
        if (it == labels.by_image.end()) continue;
        detail::require(it->second.first.size() == s.object_count(),
                        "labels: proposal count mismatch for image " + s.image_id);
        s.proposal_labels = it->second.first;
        s.gt_objects = it->second.second;
    }
}

}  // namespace cvqa

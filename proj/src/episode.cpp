#include "gp3/episode.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "episode container assumes a little-endian host");

namespace gp3::scenegen {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'G', 'P', '3', 'E'};
constexpr uint32_t kVersion = 1;

struct BlobDesc {
    const char* name;
    std::vector<int> shape;
    const std::vector<float>* data;
};

std::vector<BlobDesc> blob_layout(const Episode& ep) {
    return {
        {"images", {ep.T, ep.V, ep.H, ep.W, 3}, &ep.images},
        {"depths", {ep.T, ep.V, ep.H, ep.W}, &ep.depths},
        {"cameras", {ep.T, ep.V, 8}, &ep.cameras},
        {"proprio", {ep.T, 4}, &ep.proprio},
        {"actions", {ep.T, 4}, &ep.actions},
    };
}

size_t shape_elems(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
}

}  // namespace

void Episode::check_consistent() const {
    if (T < 1 || V < 1 || H < 1 || W < 1)
        throw std::runtime_error("episode: T, V, H, W must all be at least 1");
    for (const auto& b : blob_layout(*this))
        if (b.data->size() != shape_elems(b.shape))
            throw std::runtime_error(std::string("episode: blob ") + b.name +
                                     " has wrong length " + std::to_string(b.data->size()));
    for (int id : instruction)
        if (id < 0 || id >= static_cast<int>(vocab.size()))
            throw std::runtime_error("episode: instruction id " + std::to_string(id) +
                                     " outside vocabulary");
}

void write_episode(const std::string& path, const Episode& ep) {
    ep.check_consistent();

    json manifest;
    manifest["T"] = ep.T;
    manifest["V"] = ep.V;
    manifest["H"] = ep.H;
    manifest["W"] = ep.W;
    manifest["vocab"] = ep.vocab;
    manifest["instruction"] = ep.instruction;
    json blobs = json::object();
    uint64_t offset = 0;
    for (const auto& b : blob_layout(ep)) {
        blobs[b.name] = {{"shape", b.shape}, {"offset", offset}, {"dtype", "f32"}};
        offset += b.data->size() * sizeof(float);
    }
    manifest["blobs"] = blobs;
    const std::string mtext = manifest.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_episode: cannot open " + path);
    os.write(kMagic, 4);
    const uint32_t version = kVersion;
    os.write(reinterpret_cast<const char*>(&version), 4);
    const uint64_t mlen = mtext.size();
    os.write(reinterpret_cast<const char*>(&mlen), 8);
    os.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    for (const auto& b : blob_layout(ep))
        os.write(reinterpret_cast<const char*>(b.data->data()),
                 static_cast<std::streamsize>(b.data->size() * sizeof(float)));
    if (!os) throw std::runtime_error("write_episode: short write to " + path);
}

Episode read_episode(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_episode: cannot open " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("read_episode: bad magic at offset 0 in " + path);

    uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    if (!is || version != kVersion)
        throw std::runtime_error("read_episode: unsupported version " + std::to_string(version) +
                                 " at offset 4 in " + path);

    uint64_t mlen = 0;
    is.read(reinterpret_cast<char*>(&mlen), 8);
    if (!is) throw std::runtime_error("read_episode: truncated header at offset 8 in " + path);

    std::string mtext(mlen, '\0');
    is.read(mtext.data(), static_cast<std::streamsize>(mlen));
    if (!is) throw std::runtime_error("read_episode: truncated manifest at offset 16 in " + path);

    json manifest;
    try {
        manifest = json::parse(mtext);
    } catch (const json::exception& e) {
        throw std::runtime_error("read_episode: manifest parse failure in " + path + ": " +
                                 e.what());
    }

    Episode ep;
    ep.T = manifest.at("T").get<int>();
    ep.V = manifest.at("V").get<int>();
    ep.H = manifest.at("H").get<int>();
    ep.W = manifest.at("W").get<int>();
    ep.vocab = manifest.at("vocab").get<std::vector<std::string>>();
    ep.instruction = manifest.at("instruction").get<std::vector<int>>();

    const uint64_t blob_base = 16 + mlen;
    std::vector<std::pair<const char*, std::vector<float>*>> dests = {
        {"images", &ep.images},   {"depths", &ep.depths},   {"cameras", &ep.cameras},
        {"proprio", &ep.proprio}, {"actions", &ep.actions},
    };
    for (auto& [name, dest] : dests) {
        const json& bj = manifest.at("blobs").at(name);
        const auto shape = bj.at("shape").get<std::vector<int>>();
        const uint64_t offset = bj.at("offset").get<uint64_t>();
        dest->resize(shape_elems(shape));
        is.seekg(static_cast<std::streamoff>(blob_base + offset));
        is.read(reinterpret_cast<char*>(dest->data()),
                static_cast<std::streamsize>(dest->size() * sizeof(float)));
        if (!is)
            throw std::runtime_error("read_episode: truncated blob " + std::string(name) +
                                     " at offset " + std::to_string(blob_base + offset) + " in " +
                                     path);
    }
    ep.check_consistent();
    return ep;
}

}  // namespace gp3::scenegen

#include "gp3/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace gp3::nn {

using nlohmann::json;

void ParamStore::create(const std::string& name, ad::Shape shape, std::vector<double> value) {
    if (entries_.count(name)) throw std::invalid_argument("param '" + name + "' already exists");
    if (ad::shape_size(shape) != value.size())
        throw std::invalid_argument("param '" + name + "': shape " + ad::shape_str(shape) +
                                    " does not match " + std::to_string(value.size()) +
                                    " values");
    entries_[name] = Entry{std::move(shape), std::move(value)};
    order_.push_back(name);
}

bool ParamStore::has(const std::string& name) const { return entries_.count(name) > 0; }

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("param '" + name + "' not found");
    return it->second;
}

std::vector<double>& ParamStore::value(const std::string& name) {
    return const_cast<Entry&>(entry(name)).value;
}
const std::vector<double>& ParamStore::value(const std::string& name) const {
    return entry(name).value;
}
const ad::Shape& ParamStore::shape(const std::string& name) const { return entry(name).shape; }

size_t ParamStore::total_scalars() const {
    size_t n = 0;
    for (const auto& name : order_) n += entry(name).value.size();
    return n;
}

LeafMap::LeafMap(const ParamStore& store, const TrainableFilter& trainable) {
    for (const auto& name : store.names())
        leaves_.emplace(name, ad::Tensor::from(store.shape(name), store.value(name),
                                               trainable ? trainable(name) : true));
}

const ad::Tensor& LeafMap::operator[](const std::string& name) const {
    auto it = leaves_.find(name);
    if (it == leaves_.end()) throw std::out_of_range("leaf '" + name + "' not found");
    return it->second;
}

bool LeafMap::has(const std::string& name) const { return leaves_.count(name) > 0; }

namespace {
constexpr char kMagic[4] = {'G', 'P', '3', 'W'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store) {
    json manifest;
    json entries = json::array();
    uint64_t offset = 0;
    for (const auto& name : store.names()) {
        entries.push_back(
            {{"name", name}, {"shape", store.shape(name)}, {"offset", offset}});
        offset += store.value(name).size() * sizeof(double);
    }
    manifest["entries"] = entries;
    manifest["meta"] = store.meta.is_null() ? json::object() : store.meta;
    const std::string mtext = manifest.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write(kMagic, 4);
    const uint32_t version = kVersion;
    os.write(reinterpret_cast<const char*>(&version), 4);
    const uint64_t mlen = mtext.size();
    os.write(reinterpret_cast<const char*>(&mlen), 8);
    os.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    for (const auto& name : store.names()) {
        const auto& v = store.value(name);
        os.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("save_checkpoint: short write to " + path);
}

ParamStore load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic at offset 0 in " + path);
    uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    if (!is || version != kVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(version) + " at offset 4 in " + path);
    uint64_t mlen = 0;
    is.read(reinterpret_cast<char*>(&mlen), 8);
    if (!is) throw std::runtime_error("load_checkpoint: truncated header in " + path);
    std::string mtext(mlen, '\0');
    is.read(mtext.data(), static_cast<std::streamsize>(mlen));
    if (!is) throw std::runtime_error("load_checkpoint: truncated manifest in " + path);

    json manifest;
    try {
        manifest = json::parse(mtext);
    } catch (const json::exception& e) {
        throw std::runtime_error("load_checkpoint: manifest parse failure in " + path + ": " +
                                 e.what());
    }

    ParamStore store;
    store.meta = manifest.value("meta", json::object());
    const uint64_t blob_base = 16 + mlen;
    for (const auto& ej : manifest.at("entries")) {
        const std::string name = ej.at("name").get<std::string>();
        const auto shape = ej.at("shape").get<ad::Shape>();
        const uint64_t offset = ej.at("offset").get<uint64_t>();
        std::vector<double> value(ad::shape_size(shape));
        is.seekg(static_cast<std::streamoff>(blob_base + offset));
        is.read(reinterpret_cast<char*>(value.data()),
                static_cast<std::streamsize>(value.size() * sizeof(double)));
        if (!is)
            throw std::runtime_error("load_checkpoint: truncated blob " + name + " at offset " +
                                     std::to_string(blob_base + offset) + " in " + path);
        store.create(name, shape, std::move(value));
    }
    return store;
}

}  // namespace gp3::nn

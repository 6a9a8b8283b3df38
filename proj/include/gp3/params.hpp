#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gp3/tensor.hpp"

namespace gp3::nn {

// Master copy of named parameters. Forward passes never touch the store;
// they work on per-graph leaf tensors built by make_leaves, so independent
// graphs can run concurrently while the optimizer owns the store.
class ParamStore {
public:
    void create(const std::string& name, ad::Shape shape, std::vector<double> value);
    bool has(const std::string& name) const;
    std::vector<double>& value(const std::string& name);
    const std::vector<double>& value(const std::string& name) const;
    const ad::Shape& shape(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    size_t total_scalars() const;

    nlohmann::json meta;  // config echo carried through checkpoints

private:
    struct Entry {
        ad::Shape shape;
        std::vector<double> value;
    };
    const Entry& entry(const std::string& name) const;
    std::map<std::string, Entry> entries_;
    std::vector<std::string> order_;
};

using TrainableFilter = std::function<bool(const std::string&)>;

// Leaf tensors for one computation graph, each a copy of the store value.
// Names absent from the map are an error at lookup time.
class LeafMap {
public:
    LeafMap() = default;
    LeafMap(const ParamStore& store, const TrainableFilter& trainable);

    const ad::Tensor& operator[](const std::string& name) const;
    bool has(const std::string& name) const;
    const std::map<std::string, ad::Tensor>& all() const { return leaves_; }

private:
    std::map<std::string, ad::Tensor> leaves_;
};

inline LeafMap leaves_all_trainable(const ParamStore& s) {
    return LeafMap(s, [](const std::string&) { return true; });
}
inline LeafMap leaves_frozen(const ParamStore& s) {
    return LeafMap(s, [](const std::string&) { return false; });
}

// GP3W checkpoint: magic "GP3W", u32 version, u64 manifest length, JSON
// manifest {entries: [{name, shape, offset}], meta}, float64 LE blobs at
// manifest-relative offsets.
void save_checkpoint(const std::string& path, const ParamStore& store);
ParamStore load_checkpoint(const std::string& path);

}  // namespace gp3::nn

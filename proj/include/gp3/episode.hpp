#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gp3::toytask {
struct TaskSpec;
}

namespace gp3::scenegen {

// Multi-view trajectory: T steps of V rendered views plus proprioception,
// one instruction and per-step expert actions.
struct Episode {
    int T = 0, V = 0, H = 0, W = 0;
    std::vector<std::string> vocab;
    std::vector<int> instruction;
    std::vector<float> images;   // T*V*H*W*3
    std::vector<float> depths;   // T*V*H*W
    std::vector<float> cameras;  // T*V*8
    std::vector<float> proprio;  // T*4
    std::vector<float> actions;  // T*4

    size_t frame_pixels() const { return static_cast<size_t>(H) * W; }
    void check_consistent() const;  // throws on malformed field sizes
};

// GP3E container: magic "GP3E", u32 version = 1, u64 manifest length, JSON
// manifest, then f32 little-endian blobs at manifest-relative offsets in the
// order images, depths, cameras, proprio, actions.
void write_episode(const std::string& path, const Episode& ep);
Episode read_episode(const std::string& path);

// Expert rollout of a task, rendered and packed. Defined with the toy
// environment; deterministic in (seed, spec).
Episode make_episode(uint64_t seed, const toytask::TaskSpec& spec);

}  // namespace gp3::scenegen

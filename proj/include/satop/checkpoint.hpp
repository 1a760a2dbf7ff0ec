#pragma once

// Parameter checkpoints: flat binary of 64-bit floats plus a sidecar text
// manifest (name, shape, offset) with a versioned header.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "satop/autodiff.hpp"

namespace satop {

class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void save_checkpoint(const ad::ParamStore& params, const std::string& bin_path,
                            const std::string& manifest_path) {
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw CheckpointError("cannot write " + bin_path);
    std::ofstream man(manifest_path);
    if (!man) throw CheckpointError("cannot write " + manifest_path);
    man << "SATOPCKPT 1\n";
    size_t offset = 0;
    for (const auto& p : params.all()) {
        bin.write(reinterpret_cast<const char*>(p->value.v.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
        man << p->name << " " << p->value.rows << " " << p->value.cols << " " << offset << "\n";
        offset += p->value.size();
    }
}

inline void load_checkpoint(ad::ParamStore& params, const std::string& bin_path,
                            const std::string& manifest_path) {
    std::ifstream man(manifest_path);
    if (!man) throw CheckpointError("cannot open " + manifest_path);
    std::string header;
    std::getline(man, header);
    if (header != "SATOPCKPT 1") throw CheckpointError("bad checkpoint header: " + header);
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw CheckpointError("cannot open " + bin_path);
    std::string line;
    size_t loaded = 0;
    while (std::getline(man, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string name;
        int rows, cols;
        size_t offset;
        if (!(ss >> name >> rows >> cols >> offset)) throw CheckpointError("bad manifest line: " + line);
        ad::Param& p = params.by_name(name);
        if (p.value.rows != rows || p.value.cols != cols)
            throw CheckpointError("shape mismatch for " + name);
        bin.seekg(static_cast<std::streamoff>(offset * sizeof(double)));
        bin.read(reinterpret_cast<char*>(p.value.v.data()),
                 static_cast<std::streamsize>(p.value.size() * sizeof(double)));
        if (!bin) throw CheckpointError("truncated checkpoint reading " + name);
        ++loaded;
    }
    if (loaded != params.all().size())
        throw CheckpointError("checkpoint covers " + std::to_string(loaded) + " of " +
                              std::to_string(params.all().size()) + " parameters");
}

} // namespace satop

#include "ir/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

namespace ir::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "IRCKPT1\n";
constexpr size_t kMagicLen = 8;

struct Entry {
    std::string name;
    std::vector<uint32_t> dims;
    Tensor* tensor = nullptr;
};

void collect(UNet& model, const AdamState* opt, std::vector<Entry>& entries) {
    auto push = [&](const std::string& name, Tensor& t) {
        entries.push_back({name,
                           {static_cast<uint32_t>(t.n), static_cast<uint32_t>(t.c),
                            static_cast<uint32_t>(t.h), static_cast<uint32_t>(t.w)},
                           &t});
    };
    model.visit_params(push);
    model.visit_state(push);
    if (opt) {
        size_t i = 0;
        model.visit_params([&](const std::string& name, Tensor&) {
            push("adam.m." + name, const_cast<Tensor&>(opt->m[i]));
            push("adam.v." + name, const_cast<Tensor&>(opt->v[i]));
            ++i;
        });
    }
}

template <typename T>
void write_pod(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw std::runtime_error("truncated checkpoint file");
    return v;
}

} // namespace

void save_checkpoint(UNet& model, const std::string& path, const AdamState* opt) {
    if (opt && !opt->initialized()) opt = nullptr;

    std::vector<Entry> entries;
    collect(model, opt, entries);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument(path + ": cannot open checkpoint for writing");
    f.write(kMagic, kMagicLen);
    // adam.t travels as a one-element tensor so the table stays homogeneous
    const uint32_t count = static_cast<uint32_t>(entries.size()) + (opt ? 1u : 0u);
    write_pod(f, count);

    Tensor step_tensor(1, 1, 1, 1);
    if (opt) {
        step_tensor.data[0] = static_cast<float>(opt->t);
        entries.push_back({"adam.t", {1, 1, 1, 1}, &step_tensor});
    }

    for (const Entry& e : entries) {
        write_pod(f, static_cast<uint32_t>(e.name.size()));
        f.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_pod(f, static_cast<uint8_t>(0)); // dtype f32
        write_pod(f, static_cast<uint32_t>(e.dims.size()));
        for (uint32_t d : e.dims) write_pod(f, d);
    }
    for (const Entry& e : entries)
        f.write(reinterpret_cast<const char*>(e.tensor->data.data()),
                static_cast<std::streamsize>(e.tensor->data.size() * sizeof(float)));
    if (!f) throw std::runtime_error(path + ": checkpoint write failed");
}

UNet load_checkpoint(const std::string& path, AdamState* opt) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument(path + ": cannot open checkpoint");

    char magic[kMagicLen];
    f.read(magic, kMagicLen);
    if (!f || std::string(magic, kMagicLen) != kMagic)
        throw std::runtime_error(path + ": bad checkpoint magic");

    struct RawEntry {
        std::string name;
        std::vector<uint32_t> dims;
        std::vector<float> data;
    };
    const uint32_t count = read_pod<uint32_t>(f);
    std::vector<RawEntry> raw(count);
    for (RawEntry& e : raw) {
        const uint32_t nlen = read_pod<uint32_t>(f);
        if (nlen > 4096) throw std::runtime_error(path + ": implausible tensor name length");
        e.name.resize(nlen);
        f.read(e.name.data(), nlen);
        const uint8_t dtype = read_pod<uint8_t>(f);
        if (dtype != 0) throw std::runtime_error(path + ": unsupported dtype tag");
        const uint32_t rank = read_pod<uint32_t>(f);
        if (rank != 4) throw std::runtime_error(path + ": unsupported tensor rank");
        e.dims.resize(rank);
        size_t total = 1;
        for (uint32_t& d : e.dims) {
            d = read_pod<uint32_t>(f);
            total *= d;
        }
        e.data.resize(total);
    }
    for (RawEntry& e : raw) {
        f.read(reinterpret_cast<char*>(e.data.data()),
               static_cast<std::streamsize>(e.data.size() * sizeof(float)));
        if (!f) throw std::runtime_error(path + ": truncated checkpoint payload");
    }

    std::map<std::string, const RawEntry*> by_name;
    for (const RawEntry& e : raw) by_name[e.name] = &e;

    const auto* first_conv = by_name.count("enc0.conv1.weight")
                                 ? by_name.at("enc0.conv1.weight")
                                 : nullptr;
    if (!first_conv) throw std::runtime_error(path + ": tensor table missing enc0.conv1.weight");
    const int base_width = static_cast<int>(first_conv->dims[0]);

    UNet model(base_width, /*seed=*/0);
    auto fill = [&](const std::string& name, Tensor& t) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error(path + ": tensor table missing " + name);
        const RawEntry& e = *it->second;
        if (e.data.size() != t.size() ||
            e.dims != std::vector<uint32_t>{static_cast<uint32_t>(t.n), static_cast<uint32_t>(t.c),
                                            static_cast<uint32_t>(t.h), static_cast<uint32_t>(t.w)})
            throw std::runtime_error(path + ": shape-table mismatch for " + name);
        t.data = e.data;
    };
    model.visit_params(fill);
    model.visit_state(fill);

    if (opt && by_name.count("adam.t")) {
        opt->initialize(model);
        opt->t = static_cast<int64_t>(by_name.at("adam.t")->data[0]);
        size_t i = 0;
        model.visit_params([&](const std::string& name, Tensor&) {
            fill("adam.m." + name, opt->m[i]);
            fill("adam.v." + name, opt->v[i]);
            ++i;
        });
    }
    return model;
}

} // namespace ir::nn

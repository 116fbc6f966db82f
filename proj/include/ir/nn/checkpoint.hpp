#pragma once

#include <string>

#include "ir/nn/optim.hpp"
#include "ir/nn/unet.hpp"

namespace ir::nn {

// Checkpoint file: magic "IRCKPT1\n", u32 tensor count, then per tensor
// (u32 name length, name bytes, u8 dtype tag 0 = f32, u32 rank, u32 dims...)
// followed by the raw little-endian f32 payloads in table order. BN running
// stats are always included; optimizer moments when `opt` is given.
void save_checkpoint(UNet& model, const std::string& path, const AdamState* opt = nullptr);

// Reconstructs the model (base width inferred from the tensor table) and,
// when the file carries optimizer state and `opt` is non-null, restores it.
UNet load_checkpoint(const std::string& path, AdamState* opt = nullptr);

} // namespace ir::nn

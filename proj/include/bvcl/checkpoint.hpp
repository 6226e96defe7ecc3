#pragma once

#include <string>
#include <vector>

#include "bvcl/bnn.hpp"

namespace bvcl {

// Versioned JSON posterior checkpoint; 64-bit arrays round-trip bit-exactly.
struct Checkpoint {
    VariationalPosterior posterior;
    HyperParams hyper;
    std::vector<std::string> task_names;  // one per head, order = head index
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

}  // namespace bvcl

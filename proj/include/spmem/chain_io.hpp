#pragma once

#include <string>

#include "spmem/mcmc.hpp"

namespace spmem {

// Chain files come in pairs: <prefix>.csv with the flattened parameters
// per stored draw and <prefix>_latent.csv with the latent fields.
std::string latent_path_for(const std::string& params_csv);

void write_chain(const std::string& params_csv, const Chain& chain,
                 const SpatialDataset& data);

// Rebuilds a chain from its file pair; sampler settings in the result are
// limited to what the files imply.
Chain read_chain(const std::string& params_csv, const SpatialDataset& data);

}  // namespace spmem

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include "dapnet/core/config.hpp"
#include "dapnet/model/dapnet.hpp"

namespace dapnet::model {

// Keys: d2r.*, ablation.*, mfr.*, model.*, tam.*.
const core::FieldTable<ModelConfig>& model_config_table();

}  // namespace dapnet::model

// Copyright 2026 The Blockwise Unlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// JSON encodings of plans, bases, reports and checks.

#ifndef BWU_SERIALIZE_H_
#define BWU_SERIALIZE_H_

#include <string>

#include "json.hpp"

#include "bwu/accounting.h"
#include "bwu/audit.h"
#include "bwu/divergence.h"
#include "bwu/subspace.h"

namespace bwu {

inline constexpr int kJsonFormatVersion = 1;

nlohmann::json to_json(const accounting::NoisePlan& plan);
nlohmann::json to_json(const subspace::BlockBasis& basis);
nlohmann::json to_json(const audit::AuditReport& report);
nlohmann::json to_json(const audit::DeltaEstimate& estimate);
nlohmann::json to_json(const divergence::NoiseEquivalenceReport& report);
nlohmann::json to_json(const divergence::TrajectoryReport& report);

// FormatError on a missing field, wrong type or unsupported version; the
// BlockBasis constructor re-validates the geometry.
subspace::BlockBasis basis_from_json(const nlohmann::json& j);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace bwu

#endif  // BWU_SERIALIZE_H_

// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Seeded dataset and trace generators built on SyntheticModel. Every sample
// gets a grounded layer j_v where the correct answer (and, for the probe
// question, the watermark answer "8") receives a boost, and optionally a
// language-prior bias toward a wrong answer in the top layers.

#include <cstddef>
#include <cstdint>

#include <json.hpp>

#include "tcd/layered_model.hpp"
#include "tcd/trace.hpp"

namespace tcd {

/// <s> </s> <unk>, yes/no, digits, letters, object names and filler words.
Vocabulary synthetic_vocabulary();
const std::vector<std::string>& synthetic_objects();

struct FixtureOptions {
    std::uint64_t seed = 0;
    std::size_t samples = 100;
    std::size_t num_layers = 32;
};

/// Binary existence questions. Gold alternates yes/no; every other pair is
/// biased toward the wrong answer in the top layers.
nlohmann::json make_pope_fixture(const FixtureOptions& opts);

/// Same mechanism, two questions (one yes, one no) per image and a subtask
/// label per image. `samples` counts questions and is rounded up to even.
nlohmann::json make_mme_fixture(const FixtureOptions& opts);

/// Open-ended descriptions. Each grounded object is emitted on its own step;
/// biased samples have a prior toward an absent object on one step.
nlohmann::json make_amber_fixture(const FixtureOptions& opts);

/// Emulates the exporter on synthetic models: a recorded probe stack at the
/// first content-token position and `steps` teacher-forced greedy steps on
/// the mature layer. `samples` ids are s0, s1, ...
TraceArchive make_synthetic_trace(const FixtureOptions& opts, std::size_t steps);

}  // namespace tcd

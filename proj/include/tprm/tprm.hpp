// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

#include "tprm/bench/bench.hpp"
#include "tprm/core/error.hpp"
#include "tprm/core/parallel.hpp"
#include "tprm/core/rng.hpp"
#include "tprm/core/text.hpp"
#include "tprm/core/types.hpp"
#include "tprm/implicit_prm/credit_report.hpp"
#include "tprm/implicit_prm/dpo.hpp"
#include "tprm/implicit_prm/rewards.hpp"
#include "tprm/pairgen/pair_io.hpp"
#include "tprm/pairgen/pairgen.hpp"
#include "tprm/providers/language_model.hpp"
#include "tprm/providers/scorer.hpp"
#include "tprm/providers/toy_io.hpp"
#include "tprm/providers/toy_lm.hpp"
#include "tprm/remote/client.hpp"
#include "tprm/remote/fixture_server.hpp"
#include "tprm/remote/wire.hpp"
#include "tprm/tta/decoder.hpp"

// Copyright 2026 The assocmem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "assocmem/analysis.hpp"
#include "assocmem/closed_form.hpp"
#include "assocmem/config.hpp"
#include "assocmem/dynamics.hpp"
#include "assocmem/experiments.hpp"
#include "assocmem/gamma.hpp"
#include "assocmem/lambert_w.hpp"
#include "assocmem/model.hpp"
#include "assocmem/ode.hpp"
#include "assocmem/parallel.hpp"
#include "assocmem/particles.hpp"
#include "assocmem/rng.hpp"
#include "assocmem/sharpness.hpp"
#include "assocmem/svg.hpp"
#include "assocmem/types.hpp"
#include "assocmem/verify.hpp"

// Copyright 2026 The Carleman-KPP Authors
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

#include "carleman/bounds.hpp"
#include "carleman/chebyshev.hpp"
#include "carleman/embedding.hpp"
#include "carleman/error.hpp"
#include "carleman/experiments.hpp"
#include "carleman/io.hpp"
#include "carleman/linalg.hpp"
#include "carleman/pde.hpp"
#include "carleman/solvers.hpp"
#include "carleman/spectrum.hpp"

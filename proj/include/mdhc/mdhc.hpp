// Copyright 2026 The mdhc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MDHC_MDHC_HPP_
#define MDHC_MDHC_HPP_

#include "mdhc/baselines.hpp"
#include "mdhc/checkpoint.hpp"
#include "mdhc/dataio.hpp"
#include "mdhc/decoder.hpp"
#include "mdhc/error.hpp"
#include "mdhc/head.hpp"
#include "mdhc/metrics.hpp"
#include "mdhc/ontology.hpp"
#include "mdhc/training.hpp"

#endif  // MDHC_MDHC_HPP_

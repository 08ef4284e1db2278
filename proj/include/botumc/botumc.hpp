/*
 * Copyright 2026 The BotUmc Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "botumc/autodiff.hpp"
#include "botumc/config.hpp"
#include "botumc/errors.hpp"
#include "botumc/evidential.hpp"
#include "botumc/features.hpp"
#include "botumc/gradcheck.hpp"
#include "botumc/graph.hpp"
#include "botumc/interventional.hpp"
#include "botumc/knowledge.hpp"
#include "botumc/metrics.hpp"
#include "botumc/optim.hpp"
#include "botumc/params.hpp"
#include "botumc/pipeline.hpp"
#include "botumc/random.hpp"
#include "botumc/synthetic.hpp"
#include "botumc/tensor.hpp"

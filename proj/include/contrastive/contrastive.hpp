// Copyright 2026 The Contrastive Authors.
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

#pragma once

#include "contrastive/cache.hpp"
#include "contrastive/catalog_source.hpp"
#include "contrastive/common.hpp"
#include "contrastive/dataset.hpp"
#include "contrastive/evaluation.hpp"
#include "contrastive/explainer.hpp"
#include "contrastive/hash.hpp"
#include "contrastive/http_backend.hpp"
#include "contrastive/lm_backend.hpp"
#include "contrastive/scorer.hpp"
#include "contrastive/stub_backend.hpp"
#include "contrastive/template_engine.hpp"

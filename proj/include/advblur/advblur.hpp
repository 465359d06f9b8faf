// Copyright 2026 The AdvBlur Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

// Umbrella header.

#include "advblur/ablation.hpp"
#include "advblur/blur.hpp"
#include "advblur/checkpoint.hpp"
#include "advblur/config.hpp"
#include "advblur/dataset.hpp"
#include "advblur/error.hpp"
#include "advblur/evaluator.hpp"
#include "advblur/forge.hpp"
#include "advblur/gradcam.hpp"
#include "advblur/loss.hpp"
#include "advblur/manifest.hpp"
#include "advblur/median.hpp"
#include "advblur/model.hpp"
#include "advblur/report.hpp"
#include "advblur/run_config.hpp"
#include "advblur/splits.hpp"
#include "advblur/synthetic.hpp"
#include "advblur/trainer.hpp"
#include "advblur/tsne.hpp"

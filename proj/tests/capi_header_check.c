// Copyright 2026 The tfse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* Compiled as C: the public header must stay valid C. */
#include "tfse/tfse.h"

const char* tfse_c_version(void) { return tfse_version(); }

int tfse_c_ok_is_zero(void) { return TFSE_OK == 0 && TFSE_ERR_BUSY == 11; }

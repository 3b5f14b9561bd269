// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "resilient_fft/abft.hpp"
#include "resilient_fft/common.hpp"
#include "resilient_fft/dft_oracle.hpp"
#include "resilient_fft/fault.hpp"
#include "resilient_fft/fft_core.hpp"
#include "resilient_fft/plan.hpp"
#include "resilient_fft/signal_file.hpp"

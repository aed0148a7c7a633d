// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace agrad {

/// 17 significant digits, enough to round-trip any double.
std::string format_real(double value);

}  // namespace agrad

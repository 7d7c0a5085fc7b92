# SPDX-License-Identifier: Apache-2.0
#
# Copyright (C) 2026 The fibereq Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python bindings for the fibereq equalizer library."""

from ._core import (
    Activation,
    Architecture,
    ConfigError,
    Family,
    Function,
    InvalidArgument,
    IoError,
    Model,
    ModelDims,
    NumericError,
    __version__,
    ber,
    ber_from_q,
    default_config,
    default_taylor_boundary,
    demap_16qam,
    erfc_inv,
    exact,
    generate_bits,
    lut,
    map_16qam,
    n_fpga,
    normalize_config,
    pwl,
    q_factor,
    taylor,
    throughput,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]

# Copyright 2026 The privbias Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Word-level text privatization and bias measurement."""

from privbias._core import (
    EmbeddingStore,
    Index,
    InvalidArgument,
    ParseError,
    PrivbiasError,
    ProtocolError,
    Scorer,
    TransportError,
    cohens_d,
    detokenize,
    estimate_deniability,
    format_effect_size,
    format_proportion,
    privatize,
    sample_noise_magnitudes,
    skewness,
    stereotype_report,
    tokenize,
    welch_greater_p,
)

__version__ = "0.1.0"

__all__ = [
    "EmbeddingStore",
    "Index",
    "InvalidArgument",
    "ParseError",
    "PrivbiasError",
    "ProtocolError",
    "Scorer",
    "TransportError",
    "cohens_d",
    "detokenize",
    "estimate_deniability",
    "format_effect_size",
    "format_proportion",
    "privatize",
    "sample_noise_magnitudes",
    "skewness",
    "stereotype_report",
    "tokenize",
    "welch_greater_p",
]

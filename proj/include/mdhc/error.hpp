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

#ifndef MDHC_ERROR_HPP_
#define MDHC_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace mdhc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MDHC_DEFINE_ERROR(Name)                  \
    class Name : public Error {                  \
    public:                                      \
        using Error::Error;                      \
    }

// Hierarchy file and graph validation.
MDHC_DEFINE_ERROR(ParseError);
MDHC_DEFINE_ERROR(CycleError);
MDHC_DEFINE_ERROR(DanglingEdgeError);
MDHC_DEFINE_ERROR(NonLeafCategoryError);
MDHC_DEFINE_ERROR(UnknownNodeError);
MDHC_DEFINE_ERROR(DegenerateHierarchyError);

// Head evaluation and training.
MDHC_DEFINE_ERROR(ShapeMismatchError);
MDHC_DEFINE_ERROR(TraceMismatchError);
MDHC_DEFINE_ERROR(DimensionError);

// Data files and checkpoints.
MDHC_DEFINE_ERROR(FormatError);
MDHC_DEFINE_ERROR(UnknownLabelError);
MDHC_DEFINE_ERROR(NonFiniteError);
MDHC_DEFINE_ERROR(LengthMismatchError);
MDHC_DEFINE_ERROR(TopologyMismatchError);

#undef MDHC_DEFINE_ERROR

}  // namespace mdhc

#endif  // MDHC_ERROR_HPP_

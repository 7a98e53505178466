/* Copyright 2026 The aheadeval Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ahead {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A polyline that violates the vertex-count, spacing or finiteness rules.
class InvalidGeometry : public Error {
 public:
  using Error::Error;
};

// The masked feature loss normalizer sum(M) is zero.
class EmptyMask : public Error {
 public:
  using Error::Error;
};

// Malformed input document. `pointer` is a JSON-pointer style path
// ("/frames/3/instances/0/points") to the offending element.
class SchemaError : public Error {
 public:
  SchemaError(std::string pointer, const std::string& what)
      : Error(pointer.empty() ? what : pointer + ": " + what),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

// Prediction and ground-truth datasets disagree on the set of frame ids.
class FrameMismatch : public Error {
 public:
  FrameMismatch(std::vector<std::string> missing_in_pred,
                std::vector<std::string> missing_in_gt)
      : Error(describe(missing_in_pred, missing_in_gt)),
        missing_in_pred_(std::move(missing_in_pred)),
        missing_in_gt_(std::move(missing_in_gt)) {}

  const std::vector<std::string>& missing_in_pred() const {
    return missing_in_pred_;
  }
  const std::vector<std::string>& missing_in_gt() const {
    return missing_in_gt_;
  }

 private:
  static std::string describe(const std::vector<std::string>& pred,
                              const std::vector<std::string>& gt) {
    auto join = [](const std::vector<std::string>& ids) {
      std::string out;
      for (const auto& id : ids) {
        if (!out.empty()) out += ", ";
        out += id;
      }
      return out;
    };
    std::string msg = "frame sets differ;";
    if (!pred.empty()) msg += " missing from predictions: [" + join(pred) + "];";
    if (!gt.empty()) msg += " missing from ground truth: [" + join(gt) + "];";
    return msg;
  }

  std::vector<std::string> missing_in_pred_;
  std::vector<std::string> missing_in_gt_;
};

}  // namespace ahead

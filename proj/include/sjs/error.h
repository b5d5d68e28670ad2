/*
 * Copyright 2026 The sjslab Authors.
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

#ifndef SJSLAB_SJS_ERROR_H_
#define SJSLAB_SJS_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sjs {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A label has zero mass where a class-conditional distribution is needed.
class ZeroLabelMass : public Error {
 public:
  ZeroLabelMass(std::size_t label, const std::string& what)
      : Error(what), label_(label) {}
  std::size_t label() const { return label_; }

 private:
  std::size_t label_;
};

// The target puts mass on a cell that is null under the source.
class AbsoluteContinuityViolated : public Error {
 public:
  AbsoluteContinuityViolated(std::size_t cell, const std::string& what)
      : Error(what), cell_(cell) {}
  // Index of the offending cell (feature cell or partition cell, depending on
  // the raising operation).
  std::size_t cell() const { return cell_; }

 private:
  std::size_t cell_;
};

// The log-likelihood objective is -inf at every feasible point.
class DegenerateObjective : public Error {
 public:
  using Error::Error;
};

// Renormalization of planted density ratios is impossible.
class InfeasibleRatios : public Error {
 public:
  using Error::Error;
};

class SchemaViolation : public Error {
 public:
  SchemaViolation(std::size_t row, std::string column, const std::string& what)
      : Error(what), row_(row), column_(std::move(column)) {}
  // 1-based data row (header excluded); 0 for header-level problems.
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

}  // namespace sjs

#endif  // SJSLAB_SJS_ERROR_H_

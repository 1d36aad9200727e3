/*
   Copyright 2026 The sbmi Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace sbmi {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-range input to an operation.
class InputError : public Error {
public:
    using Error::Error;
};

/// A parameter violates a documented range (e.g. wp outside (0, min(kappa1, kappa3))).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// No admissible value exists (e.g. no r0 for the configured K*).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// A closed-form problem has no solution for the supplied hypotheses.
class NoSolutionError : public Error {
public:
    using Error::Error;
};

/// Grid/time-step configuration that the numerical scheme cannot honour.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Grid too coarse for a feature (e.g. mollifier narrower than three cells).
class ResolutionError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Root search left its admissible horizon.
class HorizonError : public Error {
public:
    using Error::Error;
};

/// A simulation produced a non-finite state.
class SimulationAbort : public Error {
public:
    using Error::Error;
};

}  // namespace sbmi

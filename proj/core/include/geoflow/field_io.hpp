/*=========================================================================
 *
 *  Copyright the geoflow project contributors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *         http://www.apache.org/licenses/LICENSE-2.0.txt
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 *
 *=========================================================================*/
#ifndef GEOFLOW_FIELD_IO_HPP
#define GEOFLOW_FIELD_IO_HPP

#include <string>

#include "geoflow/grid.hpp"
#include "geoflow/labels.hpp"

namespace geoflow {

/// Binary field container: magic "GEOFLOW1", then kind u8, dtype u8,
/// dim u8, reserved u8, ncomp u32, dims u32[dim], spacing f64[dim],
/// origin f64[dim], payload. Everything little-endian; payload row-major
/// with x fastest and components interleaved per point.
enum class FieldKind : std::uint8_t { Scalar = 0, Vector = 1, Labels = 2, Map = 3 };
enum class FieldDtype : std::uint8_t { F32 = 0, F64 = 1, U16 = 2 };

void write_scalar(const std::string& path, const ScalarField& f,
                  FieldDtype dtype = FieldDtype::F32);
ScalarField read_scalar(const std::string& path);

void write_vector(const std::string& path, const VectorField& v,
                  FieldDtype dtype = FieldDtype::F64);
VectorField read_vector(const std::string& path);

void write_map(const std::string& path, const DeformationMap& m,
               FieldDtype dtype = FieldDtype::F64);
DeformationMap read_map(const std::string& path);

void write_labels(const std::string& path, const LabelMap& l);
LabelMap read_labels(const std::string& path);

/// Kind stored in a field file, without reading its payload.
FieldKind read_field_kind(const std::string& path);

/// 8-bit PGM with min-max windowing. 3D fields pass the slicing axis and
/// slice index; 2D fields ignore them.
void export_image_2d(const ScalarField& f, const std::string& path,
                     int axis = 2, int slice = 0);

/// PPM with a fixed 16-color palette cycled over label ids (background
/// black).
void export_labels_2d(const LabelMap& l, const std::string& path,
                      int axis = 2, int slice = 0);

}  // namespace geoflow

#endif

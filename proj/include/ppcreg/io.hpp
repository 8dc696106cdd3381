#pragma once

#include <filesystem>

#include "ppcreg/drr.hpp"
#include "ppcreg/geometry.hpp"
#include "ppcreg/volume.hpp"

namespace ppcreg {

// Volume file:
//   PPCVOL 1
//   dims <nx> <ny> <nz>
//   spacing <sx> <sy> <sz>
//   origin <ox> <oy> <oz>
//   type f32le
//   end
// followed by nx*ny*nz little-endian float32 voxels, x fastest.
void write_volume(const std::filesystem::path& path, const Volume& v);
Volume read_volume(const std::filesystem::path& path);

// Image file: same layout with magic PPCIMG and keys width, height,
// pixel_spacing; payload row-major.
void write_image(const std::filesystem::path& path, const Image2D& img);
Image2D read_image(const std::filesystem::path& path);

/// 16-bit binary PGM, min-max normalized to [0, 65535] (constant images map to 0).
void write_pgm(const std::filesystem::path& path, const Image2D& img);

/// Three lines of four numbers, [R | t] row-major, 17 significant digits.
void write_pose(const std::filesystem::path& path, const RigidTransform& t);
RigidTransform read_pose(const std::filesystem::path& path);

}  // namespace ppcreg

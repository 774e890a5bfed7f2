"""terrabench: benchmark construction and evaluation for remote-sensing depth.

Submodules:
  raster     georeferenced grids, native tile format, canonical resizing
  geotiff    GeoTIFF subset import
  geodesy    WGS84 <-> LV95 / UTM transforms
  align      DEM registration, outlier repair, pair scoring
  enhance    three-stage RGB stretch
  terrain    slope, six-class classification, dataset statistics
  catalog    manifest, annotation vocabulary, split generation
  evaluate   depth metrics and benchmark reports
  diffusion  text-conditioned diffusion kernels
  verification  oracle-based verification suite for the diffusion kernels
  review     human-validation HTTP service
  cli        pipeline entry point
"""

__version__ = "0.1.0"

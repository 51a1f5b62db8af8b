"""
Import check for the GSDM library
"""

import GSDM
from GSDM import NoiseSchedule, ScoreNetArch, SampleConfig, TrainConfig, DatasetSpec

print("Import successful!")
print(f"Version: {GSDM.__version__}")
print("\nAvailable classes:")
print("- NoiseSchedule")
print("- ScoreNetArch")
print("- TrainConfig")
print("- SampleConfig")
print("- DatasetSpec")

#!/usr/bin/env python

import re
from pathlib import Path

from setuptools import find_packages, setup


if __name__ == "__main__":
    version = re.findall(
        r'DOPAWP_VERSION = "(\d+.\d+.\d+[^"]*)"',
        Path("dopawp/cli.py").read_text(encoding="utf-8"),
    )[0]
    setup(
        name="dopawp",
        version=version,
        description="Derivative-free training of neural networks: weight perturbation & Dopamine optimizers",
        long_description=Path("README.md").read_text(encoding="utf-8"),
        long_description_content_type="text/markdown",
        license="LGPLv3+",
        packages=find_packages(exclude=("test", "test.*")),
        package_dir={"dopawp": "dopawp"},
        package_data={"dopawp": ["presets.ini"]},
        install_requires=[
            "numpy>=1.20",  # Generator.standard_normal on Philox, sliding_window_view
            "scipy",
        ],
        entry_points={"console_scripts": ["dopawp = dopawp.cli:main"]},
        classifiers=[
            "Development Status :: 3 - Alpha",
            "Intended Audience :: Science/Research",
            "License :: OSI Approved :: GNU Lesser General Public License v3 (LGPLv3)",
            "Programming Language :: Python",
            "Programming Language :: Python :: 3.8",
            "Programming Language :: Python :: 3.9",
            "Programming Language :: Python :: 3.10",
            "Operating System :: OS Independent",
            "Topic :: Scientific/Engineering :: Artificial Intelligence",
        ],
        keywords=["weight perturbation", "derivative-free", "rnn", "optimizer", "chaotic time series"],
    )

"""Setup script for dscl."""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="dscl",
    version="0.1.0",
    description="Debiased supervised contrastive loss, label-noise pair analysis and synthetic benchmarks",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
    keywords="contrastive-learning label-noise supcon debiasing von-mises-fisher",
    python_requires=">=3.9",
    install_requires=[
        "click>=8.0.0",
        "numpy>=1.22.0",
        "scipy>=1.8.0",
        "pandas>=1.4.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0.0",
            "pytest-cov>=3.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "dscl=dscl.commands:cli",
        ],
    },
)

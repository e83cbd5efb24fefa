"""
pdeminer - PDE discovery from noisy, sparse data
Setup script for installation and distribution
"""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.strip() for line in fh if line.strip() and not line.startswith("#")]

# pytest is a development dependency, not a runtime one
requirements = [r for r in requirements if not r.startswith("pytest")]

setup(
    name="pdeminer",
    version="0.1.0",
    description="Rational neural networks and parameter-free sparse regression for discovering PDEs from data",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    python_requires=">=3.10",
    install_requires=requirements,
    extras_require={"dev": ["pytest>=7.0.0,<9.0.0"]},
    include_package_data=True,
    package_data={
        "pdeminer.presets": ["*.json"],
    },
    entry_points={
        "console_scripts": [
            "pdeminer=pdeminer.cli:main",
        ],
    },
    keywords="pde discovery, rational neural networks, sparse regression, physics-informed learning",
)

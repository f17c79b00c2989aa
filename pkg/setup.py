from setuptools import setup, find_packages

setup(
    name="fracns",
    version="0.1.0",
    description="Pseudospectral solver and verification suite for time-fractional Navier-Stokes equations",
    packages=find_packages(include=["fracns", "fracns.*"]),
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pydantic>=2.0",
    ],
    entry_points={
        "console_scripts": [
            "fracns=fracns.main:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)

from setuptools import setup, find_packages

setup(
    name="fantrack",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    install_requires=[
        "typer",
        "tqdm",
        "numpy",
        "scipy",
        "opencv-python-headless",
        "tomli; python_version < '3.11'",
    ],
    entry_points={
        "console_scripts": [
            "fantrack = fantrack.cli.main:main",
        ],
    },
    python_requires=">=3.8",
    license="MIT",
    description="Monocular 6DoF object pose tracking with fan-shaped contour search and interior optical flow",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
)

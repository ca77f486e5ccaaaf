from setuptools import setup, find_packages

setup(
    name="isac-radar-toolkit",
    version="0.1.0",
    description="Distributed multi-static ISAC radar simulator and processing toolkit",
    packages=find_packages(include=["src", "src.*", "config"]),
    install_requires=[
        "numpy>=1.21.0",
        "matplotlib>=3.5.0",
        "ortools>=9.0",
        "pytest>=7.0.0",
        "scipy>=1.7.0",
        "tqdm>=4.60.0",
    ],
    entry_points={"console_scripts": ["isac=src.cli:main"]},
    python_requires=">=3.8",
)

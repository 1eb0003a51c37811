from setuptools import setup, find_packages

with open("requirements.txt") as f:
    requirements = [line.strip() for line in f if line.strip() and not line.startswith("#")]

setup(
    name="fraglab",
    version="0.1.0",
    description="Simulation and analytic oracles for fragmentation at nodes of stable Levy trees",
    packages=find_packages(include=["src", "src.*"]),
    install_requires=[r for r in requirements if not r.startswith("matplotlib")],
    extras_require={"plot": ["matplotlib"]},
    entry_points={"console_scripts": ["fraglab=src.fraglab:main"]},
    python_requires=">=3.8",
)

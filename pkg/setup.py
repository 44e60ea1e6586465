"""
Setup

"""
from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as f:
    readme = f.read()

setup(
    name="pad-middleware",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=["main"],
    install_requires=[
        "fastapi",
        "uvicorn",
        "python-dotenv",
        "redis",
        "httpx",
        "pydantic",
        "cryptography",
        "pandas",
        "numpy",
    ],
    entry_points={
        "console_scripts": [
            "pad-middleware = main:main",
        ],
    },
    description="Policy-attached data middleware with attested key delegators",
    long_description=readme,
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.10",
)

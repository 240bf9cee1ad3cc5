from setuptools import setup, find_packages

setup(
    name="expression-gan",
    version="0.1.0",
    description="Landmark-guided two-stage facial expression translation",
    author="TM Hospitality Strategies",
    author_email="email@info.com",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    include_package_data=True,
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "torch>=2.0.0",
        "Pillow>=10.0.0",
        "pydantic>=2.5.2",
        "jsonschema>=4.20.0",
        "python-dotenv>=1.0.1",
        "tqdm>=4.66.0",
    ],
    entry_points={
        "console_scripts": [
            "expression-gan=expression_gan.cli:main",
        ],
    },
    python_requires=">=3.9",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: OS Independent",
    ],
)

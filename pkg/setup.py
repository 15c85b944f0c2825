"""The setup and installation script."""

from re import compile as re_compile
from typing import Final, Pattern

from setuptools import setup

#: the url where the documentation is published
DOC_URL: Final[str] = "https://thomasweise.github.io/thermogest"

#: section links like `[Usage](#3-usage)`, which only exist in the docs
SECTION_LINK: Final[Pattern] = re_compile("(\\[.+?])\\(#\\d+-(.+?)\\)")


def long_description(readme: str = "README.md") -> str:
    """
    Load the README and point its section links to the documentation.

    Lines inside code blocks are left alone.

    :param readme: the README file
    :return: the long description
    """
    lines: Final[list[str]] = []
    in_code: bool = False
    with open(readme, encoding="utf-8-sig") as reader:
        for raw in reader:
            line = raw.rstrip()
            if line.startswith("```"):
                in_code = not in_code
            elif not in_code:
                line = SECTION_LINK.sub(f"\\1({DOC_URL}#\\2)", line)
            lines.append(line)
    return "\n".join(lines)


setup(long_description=long_description(),
      long_description_content_type="text/markdown")

import sys

from pi_quant.cli import main


def pi_quant_cli():
    return main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(pi_quant_cli())

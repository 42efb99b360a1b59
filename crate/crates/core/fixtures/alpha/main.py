import pkg


def main():
    engine = pkg.Engine()
    return engine.run()


if __name__ == "__main__":
    main()

fn main() -> anyhow::Result<()> {
    cellsched_cli::cli::main()
}

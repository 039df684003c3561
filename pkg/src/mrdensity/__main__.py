from mrdensity.cli import main

raise SystemExit(main())

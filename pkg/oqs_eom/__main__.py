from oqs_eom.main import main

raise SystemExit(main())
